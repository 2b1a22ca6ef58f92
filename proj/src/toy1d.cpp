#include "dklct/toy1d.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace dklct {

double StepFunction::integral(double a, double b) const {
    if (b < a) return -integral(b, a);
    const double split = std::clamp(location, a, b);
    return low * (split - a) + high * (b - split);
}

std::vector<LineMeasurement> step_dataset(const StepFunction& step, std::size_t count, double noise,
                                          std::uint64_t seed) {
    if (noise < 0.0) throw std::invalid_argument("step_dataset: negative noise");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<LineMeasurement> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double a = unit(rng), b = unit(rng);
        if (b < a) std::swap(a, b);
        const double e = gauss(rng);
        out.push_back({{0.5 * (a + b)}, {1.0}, 0.5 * (b - a), step.integral(a, b) + noise * e});
    }
    return out;
}

} // namespace dklct
