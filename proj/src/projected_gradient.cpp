#include "bisched/projected_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace bisched {

void project_capped_simplex(Eigen::Ref<Eigen::VectorXd> x, double cap) {
    x = x.cwiseMax(0.0);
    if (x.sum() <= cap) return;
    // Find the shift tau with sum(max(x - tau, 0)) = cap.
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double prefix = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        prefix += sorted[k];
        const double candidate = (prefix - cap) / static_cast<double>(k + 1);
        if (k + 1 == sorted.size() || sorted[k + 1] <= candidate) {
            tau = candidate;
            break;
        }
    }
    x = (x.array() - tau).cwiseMax(0.0);
}

namespace {
constexpr double kSlopeNoise = 16.0 * std::numeric_limits<double>::epsilon();
}  // namespace

AscentResult projected_gradient_ascent(const AscentProblem& p, Eigen::VectorXd& x, const AscentOptions& o) {
    p.project(x);
    double f = p.objective(x);
    Eigen::VectorXd g = p.gradient(x);

    AscentResult result;
    Eigen::VectorXd best = x;
    result.measure = p.measure(x);
    if (result.measure <= o.tolerance) {
        result.converged = true;
        return result;
    }

    std::deque<double> recent{f};
    double step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());

    for (int it = 1; it <= o.max_iterations; ++it) {
        result.iterations = it;
        Eigen::VectorXd trial = x + step * g;
        p.project(trial);
        const Eigen::VectorXd direction = trial - x;
        if (direction.lpNorm<Eigen::Infinity>() == 0.0) break;
        // Projection gives g.d >= |d|^2 / step exactly; the computed dot
        // product can lose that to cancellation when g has a large component
        // orthogonal to the feasible face.
        const double slope = std::max(g.dot(direction), direction.squaredNorm() / step);
        if (!(slope > 0.0)) break;

        const double reference = *std::max_element(recent.begin(), recent.end());
        double lambda = 1.0;
        Eigen::VectorXd next;
        Eigen::VectorXd g_next;
        double f_next = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        while (lambda > 1e-30) {
            next = x + lambda * direction;
            f_next = p.objective(next);
            if (std::isfinite(f_next)) {
                g_next = p.gradient(next);
                // Near the optimum objective differences drown in rounding; for a
                // concave objective a nonnegative slope at the end point still
                // certifies ascent along the whole segment. The slope is only
                // known up to the rounding of the iterates themselves.
                const double noise = kSlopeNoise * (g_next.cwiseAbs().dot(next.cwiseAbs()) + g_next.cwiseAbs().sum());
                if (f_next >= reference + o.sufficient_ascent * lambda * slope ||
                    g_next.dot(direction) >= -noise * lambda) {
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = next - x;
        const double curvature = -s.dot(g_next - g);
        step = curvature > 0.0 ? std::clamp(s.squaredNorm() / curvature, o.min_step, o.max_step) : o.max_step;

        x = next;
        f = f_next;
        g = g_next;
        recent.push_back(f);
        if (static_cast<int>(recent.size()) > o.nonmonotone_memory) recent.pop_front();

        const double m = p.measure(x);
        if (m < result.measure) {
            result.measure = m;
            best = x;
        }
        if (m <= o.tolerance) {
            result.converged = true;
            break;
        }
    }
    x = best;
    return result;
}

}  // namespace bisched
