#pragma once

#include "phifno/grid.hpp"

namespace phifno {

// One training example: the three data channels and the solver output,
// all nodal values on the same grid.
struct Sample {
  FieldGrid f, phi, g, w;
};

}  // namespace phifno
