#pragma once

// One-dimensional step-function benchmark: integrals of a step over random
// sub-intervals of [0, 1].

#include "dklct/quad.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dklct {

struct StepFunction {
    double location = 0.5;
    double low = 0.0;
    double high = 1.0;

    double operator()(double x) const { return x < location ? low : high; }
    /// Exact ∫_a^b of the step.
    double integral(double a, double b) const;
};

/// `count` intervals with endpoints drawn uniformly in [0, 1]; values are
/// exact integrals plus N(0, noise²).
std::vector<LineMeasurement> step_dataset(const StepFunction& step, std::size_t count, double noise,
                                          std::uint64_t seed);

} // namespace dklct
