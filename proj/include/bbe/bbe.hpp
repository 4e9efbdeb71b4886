#ifndef BBE_BBE_HPP
#define BBE_BBE_HPP

#include "bbe/config.hpp"
#include "bbe/config_json.hpp"
#include "bbe/core_model.hpp"
#include "bbe/error.hpp"
#include "bbe/event_ingest.hpp"
#include "bbe/persistence.hpp"
#include "bbe/scoring.hpp"
#include "bbe/selector.hpp"
#include "bbe/service.hpp"
#include "bbe/sim.hpp"

#endif  // BBE_BBE_HPP
