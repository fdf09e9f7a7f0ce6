#pragma once

#include "cfscm/scm.hpp"

namespace cfscm {

// Kernel bandwidth from the median pairwise distance of the pooled samples.
// Exact for n <= 2000; deterministically subsampled above. Throws when the
// median distance is zero.
double median_heuristic(const Dataset& pooled);

// Biased V-statistic of the squared MMD with a squared-exponential kernel
// k(x,y) = exp(-||x-y||^2 / (2 bw^2)).
double mmd2(const Dataset& x, const Dataset& y, double bandwidth);

// Reported value: sqrt of the V-statistic.
double mmd(const Dataset& x, const Dataset& y, double bandwidth);

// Per-coordinate sample variance pooled over facta, summed over coordinates
// that were not intervened for the contributing row. `intervened` is either
// empty or one target list per row.
double cf_variance(const Dataset& samples,
                   const std::vector<std::vector<int>>& intervened = {});

}  // namespace cfscm
