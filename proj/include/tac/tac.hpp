#pragma once

// Umbrella header for the truth-anchored calibration toolkit.

#include "tac/core.hpp"
#include "tac/error.hpp"
#include "tac/ingest.hpp"
#include "tac/mapper.hpp"
#include "tac/metrics.hpp"
#include "tac/proxy_lab.hpp"
#include "tac/rng.hpp"
#include "tac/supervision.hpp"
