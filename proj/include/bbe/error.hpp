#ifndef BBE_ERROR_HPP
#define BBE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace bbe {

/// Base of every error the engine throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An event that violates the HistoryEvent invariants (empty obj, negative time, ...).
class InvalidEvent : public Error {
 public:
  using Error::Error;
};

/// A timestamp lies in the future relative to the evaluation clock.
class ClockSkew : public Error {
 public:
  using Error::Error;
};

/// Scoring was asked about a banner with no BannerEconomics entry.
class MissingEconomics : public Error {
 public:
  explicit MissingEconomics(const std::string& banner)
      : Error("no economics configured for banner '" + banner + "'"), banner_(banner) {}

  const std::string& banner() const noexcept { return banner_; }

 private:
  std::string banner_;
};

class InvalidRequest : public Error {
 public:
  using Error::Error;
};

/// Cookie or snapshot text that cannot be decoded.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Snapshot parse failure; carries the 1-based line number.
class SnapshotError : public DecodeError {
 public:
  SnapshotError(std::size_t line, const std::string& what)
      : DecodeError("snapshot line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bbe

#endif  // BBE_ERROR_HPP
