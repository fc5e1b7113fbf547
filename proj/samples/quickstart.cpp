// Solves both dividend problems for the reference model and checks the
// variational inequalities.

#include <iostream>

#include "dualdiv/dualdiv.hpp"

int main() {
    using namespace dualdiv;
    const double q = 0.05;
    const LevyModel model = validate_model(paper_model(2.33, 1.0));

    const DividendSolution div = optimal_barrier_a(model, q);
    std::cout << "mu = " << div.mu << ", Phi(q) = " << div.sf.phi() << '\n';
    std::cout << "a* = " << div.a_star << ", v(a*) = " << div.value_at_barrier << '\n';

    const InjectionSolution inj = optimal_barrier_b(div.sf, 2.0);
    std::cout << "b*(phi = 2) = " << inj.b_star << ", v(0) = " << value_injection_opt(inj, 0.0) << '\n';

    const VIReport vd = check_vi_dividend(div);
    const VIReport vi = check_vi_injection(inj);
    std::cout << "VI dividend: " << (vd.pass ? "pass" : "fail") << " (" << vd.max_violation << ")\n";
    std::cout << "VI injection: " << (vi.pass ? "pass" : "fail") << " (" << vi.max_violation << ")\n";
    return vd.pass && vi.pass ? 0 : 1;
}
