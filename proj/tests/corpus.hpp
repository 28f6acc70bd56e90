#pragma once

#include <string>
#include <vector>

#include "kimura/operator_model.hpp"

namespace kimura::testing {

struct CorpusEntry {
    std::string name;
    OperatorSpec1D spec;
};

/// Transverse/transverse operators covering every such cell of the
/// Kimura/quadratic classification, with constant and non-constant a.
inline std::vector<CorpusEntry> transverse_corpus() {
    return {
        {"kimura_kimura_beta", {{1.0}, {0.7, -1.5}, 1, 1}},
        {"kimura_kimura_variable_a", {{1.0, 0.0, 1.0}, {0.4, -1.0, 0.2}, 1, 1}},
        {"kimura_quadratic_case1", {{1.0}, {0.5, -2.5}, 1, 2}},
        {"quadratic_kimura", {{1.0}, {1.6, -2.1}, 2, 1}},
        {"quadratic_quadratic", {{1.0}, {1.5, -3.5}, 2, 2}},
        {"quadratic_quadratic_variable_a", {{2.0, -1.0}, {3.0, -7.0, 1.5}, 2, 2}},
    };
}

/// The one-dimensional model family dX = (c0(1-X)^2 - c1 X(1-X))dt + sqrt(2X(1-X)^2) dW.
inline OperatorSpec1D mixed_model(double c0, double c1) { return {{1.0}, {c0, -c0 - c1}, 1, 2}; }

} // namespace kimura::testing
