#include "ccp/grad_check.hpp"

#include <cmath>

#include "ccp/errors.hpp"

namespace ccp {

double relative_error(double a, double b) {
    // The 1e-4 floor keeps near-zero gradients from failing on central
    // difference cancellation noise (~1e-10 absolute at step 1e-5).
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-4});
    return std::fabs(a - b) / denom;
}

namespace {

double eval(const ScalarFn& f, const Tensor& at) {
    Tape tape;
    Var x = tape.leaf(at, false);
    Var out = f(tape, x);
    const Tensor& v = out.tape->value(out);
    if (!v.is_scalar()) {
        throw ShapeError("grad_check: f must be scalar-valued, got " + v.shape_str());
    }
    return v[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor& at, double step, double tol) {
    if (!at.all_finite()) {
        throw NumericError("grad_check: evaluation point contains non-finite values");
    }

    Tape tape;
    Var x = tape.leaf(at, true);
    Var out = f(tape, x);
    if (!tape.value(out).is_scalar()) {
        throw ShapeError("grad_check: f must be scalar-valued, got " +
                         tape.value(out).shape_str());
    }
    tape.backward(out);
    const Tensor analytic = tape.grad(x);

    GradCheckReport report;
    Tensor probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double fp = eval(f, probe);
        probe[i] = saved - step;
        const double fm = eval(f, probe);
        probe[i] = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double err = relative_error(analytic[i], fd);
        if (err >= report.max_rel_err) {
            report.max_rel_err = err;
            report.worst_index = i;
            report.tape_grad_at_worst = analytic[i];
            report.fd_grad_at_worst = fd;
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace ccp
