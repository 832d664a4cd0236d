#pragma once

#include <cmath>

namespace vp {

// Neumaier-compensated accumulator. Used for every diagnostic reduction so
// that results do not depend on how particle ranges are partitioned.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

}  // namespace vp
