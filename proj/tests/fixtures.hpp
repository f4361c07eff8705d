#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mobiscope/inference.hpp"

namespace testing {

// Stopping distance against speed for 50 cars (Ezekiel, 1930).
inline mobiscope::inference::DesignMatrix cars_design() {
    const std::vector<double> speed{4,  4,  7,  7,  8,  9,  10, 10, 10, 11, 11, 12, 12, 12, 12, 13, 13,
                                    13, 13, 14, 14, 14, 14, 15, 15, 15, 16, 16, 17, 17, 17, 18, 18, 18,
                                    18, 19, 19, 19, 20, 20, 20, 20, 20, 22, 23, 24, 24, 24, 24, 25};
    const std::vector<double> dist{2,  10, 4,  22, 16, 10, 18, 26, 34, 17, 28, 14, 20, 24, 28, 26, 34,
                                   34, 46, 26, 36, 60, 80, 20, 26, 54, 32, 40, 32, 40, 50, 42, 56, 76,
                                   84, 36, 46, 68, 32, 48, 52, 56, 64, 66, 54, 70, 92, 93, 120, 85};
    Eigen::MatrixXd x(50, 1);
    Eigen::VectorXd y(50);
    std::vector<std::string> units;
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = speed[i];
        y(i) = dist[i];
        units.push_back(std::to_string(i + 1));
    }
    return mobiscope::inference::make_design(units, {"speed"}, x, y, "dist");
}

// Deterministic commune-like cross-section with the five mobility terms.
inline mobiscope::inference::DesignMatrix synthetic_design() {
    const int n = 40;
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y(n);
    std::vector<std::string> units;
    for (int i = 0; i < n; ++i) {
        const double t = i + 1.0;
        const double in = 1.0 + 0.5 * std::sin(0.7 * t);
        const double out = 0.8 + 0.3 * std::cos(1.3 * t);
        const double flow = (i % 7 == 0) ? 0.0 : 0.05 * (1.0 + std::sin(2.1 * t));
        const double score = 40.0 + 25.0 * std::sin(0.37 * t + 1.0);
        x.row(i) << in, out, flow, score, out * flow;
        y(i) = 120.0 + 310.0 * in - 45.0 * out + 900.0 * flow + 2.2 * score - 600.0 * out * flow +
               35.0 * std::sin(5.3 * t) + 20.0 * std::cos(11.1 * t);
        units.push_back("c" + std::to_string(100 + i));
    }
    return mobiscope::inference::make_design(units, {"MobIn", "MobOut", "Flow", "Score", "MobOut:Flow"}, x, y,
                                             "CumCases");
}

}  // namespace testing
