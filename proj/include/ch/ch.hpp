#pragma once

// Numerical core. Config parsing and file output live in ch/config.hpp and
// ch/output.hpp, which additionally need yaml-cpp and fmt.
#include "ch/error.hpp"
#include "ch/model.hpp"
#include "ch/quadrature.hpp"
#include "ch/mesh.hpp"
#include "ch/fespace.hpp"
#include "ch/assembly.hpp"
#include "ch/projections.hpp"
#include "ch/functionals.hpp"
#include "ch/integrator.hpp"
#include "ch/harness.hpp"
