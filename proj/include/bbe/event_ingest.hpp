#ifndef BBE_EVENT_INGEST_HPP
#define BBE_EVENT_INGEST_HPP

#include <functional>
#include <map>
#include <string_view>

#include "bbe/config.hpp"
#include "bbe/core_model.hpp"

namespace bbe {

/// One (feature, banner) cell of the impression and click matrices.
struct CellCounts {
  Count imps = 0;
  Count clicks = 0;

  friend bool operator==(const CellCounts&, const CellCounts&) = default;
};

/// Global per-banner totals: the denominator and numerator of the global CTR,
/// plus registration counts by level.
struct BannerTotals {
  Count imps = 0;
  Count clicks = 0;
  std::map<int, Count> registrations;

  friend bool operator==(const BannerTotals&, const BannerTotals&) = default;
};

/// Population statistics for a feature, used to normalize counter weights.
struct FeatureTotals {
  Count users = 0;        // users holding the feature
  Count occurrences = 0;  // feature events across all users

  friend bool operator==(const FeatureTotals&, const FeatureTotals&) = default;
};

/// Sparse impression matrix S, click matrix C and per-banner totals. Only
/// nonzero cells are materialized. Rows are features, columns banners.
class GlobalStats {
 public:
  using Row = std::map<BannerId, CellCounts, std::less<>>;
  using Matrix = std::map<FeatureId, Row, std::less<>>;

  CellCounts cell(std::string_view feature, std::string_view banner) const {
    const auto row = matrix_.find(feature);
    if (row == matrix_.end()) return {};
    const auto it = row->second.find(banner);
    return it == row->second.end() ? CellCounts{} : it->second;
  }

  BannerTotals banner(std::string_view b) const {
    const auto it = banners_.find(b);
    return it == banners_.end() ? BannerTotals{} : it->second;
  }

  FeatureTotals feature(std::string_view f) const {
    const auto it = features_.find(f);
    return it == features_.end() ? FeatureTotals{} : it->second;
  }

  void add_imps(const FeatureId& f, const BannerId& b, Count n) {
    if (n != 0) matrix_[f][b].imps += n;
  }
  void add_clicks(const FeatureId& f, const BannerId& b, Count n) {
    if (n != 0) matrix_[f][b].clicks += n;
  }
  BannerTotals& banner_totals(const BannerId& b) { return banners_[b]; }
  FeatureTotals& feature_totals(const FeatureId& f) { return features_[f]; }

  const Matrix& matrix() const noexcept { return matrix_; }
  const std::map<BannerId, BannerTotals, std::less<>>& banners() const noexcept { return banners_; }
  const std::map<FeatureId, FeatureTotals, std::less<>>& features() const noexcept { return features_; }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& [_, row] : matrix_) n += row.size();
    return n;
  }

  friend bool operator==(const GlobalStats&, const GlobalStats&) = default;

 private:
  Matrix matrix_;
  std::map<BannerId, BannerTotals, std::less<>> banners_;
  std::map<FeatureId, FeatureTotals, std::less<>> features_;
};

/// Impression rule. `profile` must already include this impression.
inline void apply_impression(GlobalStats& stats, const UserProfile& profile, const BannerId& banner) {
  for (const auto& [f, _] : profile.features) stats.add_imps(f, banner, 1);
  ++stats.banner_totals(banner).imps;
}

/// Click rule. `profile` must already include this click, so C_u(b) >= 1.
/// With `unique_only`, only the user's first click on the banner is counted.
inline void apply_click(GlobalStats& stats, const UserProfile& profile, const BannerId& banner,
                        bool unique_only) {
  if (unique_only && count_of(profile.clicks, banner) > 1) return;
  for (const auto& [f, _] : profile.features) stats.add_clicks(f, banner, 1);
  ++stats.banner_totals(banner).clicks;
}

/// New-feature rule: the first time a user acquires `feature`, its row is
/// credited with the user's accumulated impressions and clicks.
/// `profile_before` must not yet include this feature event.
inline void apply_feature_event(GlobalStats& stats, const UserProfile& profile_before,
                                const FeatureId& feature) {
  if (profile_before.has_feature(feature)) return;
  for (const auto& [b, n] : profile_before.impressions) stats.add_imps(feature, b, n);
  for (const auto& [b, n] : profile_before.clicks) stats.add_clicks(feature, b, n);
}

/// Appends `event` to `history` and updates `stats`. On InvalidEvent neither
/// argument is modified.
inline void ingest(GlobalStats& stats, UserHistory& history, const HistoryEvent& event,
                   const EngineConfig& cfg) {
  validate(event);
  UserProfile profile = derive_profile(history);
  history.record(event);

  switch (event.kind.type) {
    case EventType::Impression:
      accumulate(profile, event);
      apply_impression(stats, profile, event.obj);
      break;
    case EventType::Click:
      accumulate(profile, event);
      apply_click(stats, profile, event.obj, cfg.unique_only);
      break;
    case EventType::PageView:
    case EventType::SearchQuery: {
      const FeatureId f = *feature_of(event);
      auto& totals = stats.feature_totals(f);
      if (!profile.has_feature(f)) ++totals.users;
      ++totals.occurrences;
      apply_feature_event(stats, profile, f);
      break;
    }
    case EventType::Registration:
      ++stats.banner_totals(event.obj).registrations[event.kind.level];
      break;
  }
}

}  // namespace bbe

#endif  // BBE_EVENT_INGEST_HPP
