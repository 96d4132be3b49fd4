#pragma once

#include <vector>

#include "lbds/levy_model.hpp"

namespace lbds::testing {

inline LevyCharacteristics poisson(double lambda = 2.0, double T = 1.0) {
  return LevyCharacteristics(T, 0.0, 0.0, {JumpAtom{1.0, lambda}}, Modulation::proportional);
}

inline LevyCharacteristics two_atom(double T = 1.0) {
  return LevyCharacteristics(T, 0.0, 0.0, {JumpAtom{1.0, 1.0}, JumpAtom{-1.0, 1.0}},
                             Modulation::proportional);
}

inline LevyCharacteristics brownian(double c0 = 1.0, double T = 1.0) {
  return LevyCharacteristics(T, 0.0, c0, {}, Modulation::proportional);
}

}  // namespace lbds::testing
