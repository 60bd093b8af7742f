#pragma once

#include <vector>

#include "sciss/ising.hpp"

namespace sciss {

struct LabeledSample {
  OutcomeConfig y;
  Vec x;  // auxiliary features, length p
  Vec w;  // adjustment features with leading intercept, length d + 1
};

struct UnlabeledSample {
  Vec x;
  Vec w;
};

// Labeled and unlabeled records sharing one feature schema.
struct Dataset {
  int q = 0;
  int p = 0;
  int d = 0;
  std::vector<LabeledSample> labeled;
  std::vector<UnlabeledSample> unlabeled;

  void validate() const {
    for (const auto& s : labeled) {
      if (s.y.q() != q || s.x.size() != p) throw DimensionMismatch("Dataset: labeled record has wrong shape");
      validate_adjustment(s.w, d);
    }
    for (const auto& s : unlabeled) {
      if (s.x.size() != p) throw DimensionMismatch("Dataset: unlabeled record has wrong shape");
      validate_adjustment(s.w, d);
    }
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.q != b.q || a.p != b.p || a.d != b.d) return false;
    if (a.labeled.size() != b.labeled.size() || a.unlabeled.size() != b.unlabeled.size()) return false;
    for (std::size_t i = 0; i < a.labeled.size(); ++i) {
      const auto& l = a.labeled[i];
      const auto& r = b.labeled[i];
      if (!(l.y == r.y) || l.x != r.x || l.w != r.w) return false;
    }
    for (std::size_t i = 0; i < a.unlabeled.size(); ++i)
      if (a.unlabeled[i].x != b.unlabeled[i].x || a.unlabeled[i].w != b.unlabeled[i].w) return false;
    return true;
  }
};

// Elementwise log(x + 1), applied to count features before fits that treat
// them as continuous covariates.
inline Vec log1p_features(const Vec& x) { return x.array().log1p().matrix(); }

}  // namespace sciss
