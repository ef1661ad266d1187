#pragma once

#include "model.hpp"

namespace peakhabit {

enum class RegionLabel { Bankrupt, Gloom, Depression, Recovery, Satisfactory, AboveBliss };

inline const char* to_string(RegionLabel r) {
  switch (r) {
    case RegionLabel::Bankrupt: return "Bankrupt";
    case RegionLabel::Gloom: return "Gloom";
    case RegionLabel::Depression: return "Depression";
    case RegionLabel::Recovery: return "Recovery";
    case RegionLabel::Satisfactory: return "Satisfactory";
    case RegionLabel::AboveBliss: return "AboveBliss";
  }
  return "?";
}

/// Wealth thresholds at one peak level, ordered from low to high.
struct ThresholdSet {
  double h = 0;
  double w_bkrp = 0;
  double w_low = 0;
  double w_ref = 0;
  double w_peak = 0;
  double w_updt = 0;
};

/// Intervals are closed on the upper end: (W_low, W_ref] is Depression, and so on.
inline RegionLabel classify_region(const ModelParams&, const StatePoint& s, const ThresholdSet& t) {
  if (s.x < t.w_bkrp) return RegionLabel::Bankrupt;
  if (s.x <= t.w_low) return RegionLabel::Gloom;
  if (s.x <= t.w_ref) return RegionLabel::Depression;
  if (s.x <= t.w_peak) return RegionLabel::Recovery;
  if (s.x <= t.w_updt) return RegionLabel::Satisfactory;
  return RegionLabel::AboveBliss;
}

}  // namespace peakhabit
