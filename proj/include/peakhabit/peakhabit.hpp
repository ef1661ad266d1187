#pragma once

#include "analysis.hpp"
#include "dual_core.hpp"
#include "errors.hpp"
#include "inversion.hpp"
#include "model.hpp"
#include "policy.hpp"
#include "region.hpp"
#include "simulate.hpp"
#include "thresholds.hpp"
