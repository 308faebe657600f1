#include "ada/common.hpp"

#include <cmath>

namespace ada {

void check_probability_vector(std::span<const double> p, double tol) {
    if (p.empty()) throw InvalidInput("empty probability vector");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("probability entry out of range");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw InvalidInput("probability vector does not sum to 1");
}

}  // namespace ada
