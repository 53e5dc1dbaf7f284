#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "droid/corpus.hpp"

namespace testutil {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

// Seeded Gaussian blobs: `per_class` points around each of `classes` centers
// spread `separation` apart along rotated axes.
inline Blobs make_blobs(int classes, int per_class, int dims, double separation, double noise,
                        uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Blobs b;
    b.x.resize(classes * per_class, dims);
    b.y.resize(static_cast<size_t>(classes) * per_class);
    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < classes; ++c) {
        Eigen::VectorXd center(dims);
        for (int d = 0; d < dims; ++d)
            center[d] = separation * (((c >> (d % 8)) & 1) ? 1.0 : -1.0) +
                        0.25 * separation * ((c * 31 + d * 17) % 7 - 3);
        centers.push_back(center);
    }
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            for (int d = 0; d < dims; ++d) b.x(row, d) = centers[c][d] + noise * gauss(rng);
            b.y[static_cast<size_t>(row)] = c;
            row++;
        }
    }
    return b;
}

inline droid::corpus::CodeSample make_sample(const std::string& id, const std::string& code,
                                             droid::corpus::Language lang,
                                             droid::corpus::ProvenanceLabel label =
                                                 droid::corpus::ProvenanceLabel::HUMAN) {
    droid::corpus::CodeSample s;
    s.id = id;
    s.code = code;
    s.language = lang;
    s.label = label;
    if (label != droid::corpus::ProvenanceLabel::HUMAN) s.generator = "synthetic-lm";
    return s;
}

} // namespace testutil
