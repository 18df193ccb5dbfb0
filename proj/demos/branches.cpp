// Traces solution branches for theta(s) = 1 + s^2 on (0, 1) in each regime and
// prints lambda, |v|_inf, |u|_inf and the stability sign.
#include <cstdio>

#include "dualschro/continuation.hpp"

using namespace dualschro;

namespace {

void print(const char* title, const Branch& b) {
    std::printf("# %s\n#   lambda        |v|_inf        |u|_inf     stab\n", title);
    for (const auto& p : b.points) {
        if (p.converged)
            std::printf("  %12.6g  %13.6g  %13.6g  %+d\n", p.lambda, p.sup_v, p.sup_u, p.stability);
        else
            std::printf("  %12.6g  (no solution: %s)\n", p.lambda, p.note.c_str());
    }
}

}  // namespace

int main() {
    const auto t = build_transform(theta1(), 1e6);
    const auto dom = prepare_domain(DomainMesh::interval(0, 1, 200));
    const double l1 = dom.eig.lambda;

    print("q = 0.5: unique branch for every lambda > 0",
          sweep(Nonlinearity(t, 0.5), dom, log_grid(0.1, 1e3, 9)));

    print("q = 1: bifurcation from zero at lambda_1",
          sweep(Nonlinearity(t, 1.0), dom, {0.5 * l1, 0.9 * l1, 1.1 * l1, 1.5 * l1, 3 * l1, 10 * l1}));

    const Nonlinearity n2(t, 2.0);
    const double ls = find_lambda_star(n2, dom, 1.0, 100.0);
    std::printf("# q = 2: fold at lambda_* = %.6g\n", ls);
    print("q = 2: maximal branch", sweep(n2, dom, {0.5 * ls, 1.01 * ls, 1.5 * ls, 2 * ls, 4 * ls}));

    const auto blow = bifurcation_from_infinity(Nonlinearity(t, 3.0), dom);
    std::printf("# q = 3: |v|_inf -> inf as lambda -> %.6g (predicted pi^2/2 from alpha^2/4 lambda_1 = %.6g)\n",
                blow.estimate, blow.predicted);
    return 0;
}
