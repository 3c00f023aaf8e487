// Active-set polishing of interior-point solutions for programs without
// explicit cones: the KKT system of the guessed active set is solved
// directly, and the result kept only if it is at least as accurate.
#pragma once

#include <vector>

#include "standard_form.hpp"

namespace lem::convex::detail {

/// ||grad f(x) + A'y + G'z||_inf over the model variables, with the exact
/// objective gradient standing in for the epigraph cone rows.
double model_stationarity(const StandardForm& sf, const Objective& obj, const std::vector<double>& x,
                          const std::vector<double>& y, const std::vector<double>& z);

/// Largest violation of Ax = b and of the orthant rows of Gx <= h.
double linear_violation(const StandardForm& sf, const std::vector<double>& x);

/// Replaces (x, y, z) by the polished point when it does not degrade
/// feasibility or stationarity. Only the model and orthant parts are touched.
bool polish(const StandardForm& sf, const Objective& obj, std::vector<double>& x, std::vector<double>& y,
            std::vector<double>& z, const std::vector<double>& s, double feas_tol);

}  // namespace lem::convex::detail
