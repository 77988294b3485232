#include "nemopt/qp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

namespace nemopt::qp {

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kEqualityRhoScale = 1e3;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplet = Eigen::Triplet<double>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower>;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

enum class RowKind { loose, inequality, equality };

class Admm {
public:
    Admm(const QuadraticProgram& prob, const Settings& s)
        : prob_(prob), set_(s), n_(prob.q.size()), m_(prob.l.size())
    {
        if (prob.P.rows() != n_ || prob.P.cols() != n_ || prob.A.cols() != n_ ||
            prob.A.rows() != m_ || prob.u.size() != m_) {
            throw std::invalid_argument("qp::solve: inconsistent problem dimensions");
        }
        kind_.resize(m_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (prob.l[i] > prob.u[i]) {
                throw std::invalid_argument("qp::solve: lower bound above upper bound");
            }
            if (prob.l[i] == -kInf && prob.u[i] == kInf) {
                kind_[i] = RowKind::loose;
            } else if (prob.u[i] - prob.l[i] < 1e-12) {
                kind_[i] = RowKind::equality;
            } else {
                kind_[i] = RowKind::inequality;
            }
        }
        At_ = prob.A.transpose();
        x_ = Vector::Zero(n_);
        z_ = Vector::Zero(m_);
        y_ = Vector::Zero(m_);
        rho_ = set_.rho;
        adapt_gap_ = set_.check_every;
        factor();
    }

    Result run();

private:
    void factor();
    void step();
    double objective(const Vector& x) const { return 0.5 * x.dot(prob_.P * x) + prob_.q.dot(x); }
    void residuals(const Vector& x, const Vector& z, const Vector& y, double& rp, double& rd,
                   double& prim_scale, double& dual_scale) const;
    bool polish(Vector& xp, Vector& yp, double& rp, double& rd);
    std::vector<signed char> active_set() const;

    const QuadraticProgram& prob_;
    Settings set_;
    Eigen::Index n_, m_;
    std::vector<RowKind> kind_;
    SparseMatrix At_;
    Vector x_, z_, y_;
    Vector rho_vec_;
    double rho_;
    Ldlt ldlt_;
    int refactorizations_ = 0;
    int adapt_gap_ = 0;
    int next_adapt_ = 0;
    std::vector<signed char> last_polish_set_;
};

void Admm::factor()
{
    rho_vec_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
        switch (kind_[i]) {
        case RowKind::loose:
            rho_vec_[i] = kRhoMin;
            break;
        case RowKind::equality:
            rho_vec_[i] = kEqualityRhoScale * rho_;
            break;
        case RowKind::inequality:
            rho_vec_[i] = rho_;
            break;
        }
    }
    SparseMatrix ident(n_, n_);
    ident.setIdentity();
    SparseMatrix M = prob_.P + set_.sigma * ident;
    M += SparseMatrix(At_ * rho_vec_.asDiagonal() * prob_.A);
    ldlt_.compute(M);
    if (ldlt_.info() != Eigen::Success) {
        throw std::runtime_error("qp::solve: KKT factorization failed");
    }
    ++refactorizations_;
}

void Admm::step()
{
    const Vector rhs = set_.sigma * x_ - prob_.q + At_ * (rho_vec_.cwiseProduct(z_) - y_);
    const Vector xt = ldlt_.solve(rhs);
    const Vector zt = prob_.A * xt;
    const double a = set_.alpha;
    x_ = a * xt + (1.0 - a) * x_;
    const Vector zh = a * zt + (1.0 - a) * z_;
    Vector zn = (zh + y_.cwiseQuotient(rho_vec_)).cwiseMax(prob_.l).cwiseMin(prob_.u);
    y_ += rho_vec_.cwiseProduct(zh - zn);
    z_ = std::move(zn);
}

void Admm::residuals(const Vector& x, const Vector& z, const Vector& y, double& rp, double& rd,
                     double& prim_scale, double& dual_scale) const
{
    const Vector Ax = prob_.A * x;
    const Vector Px = prob_.P * x;
    const Vector Aty = At_ * y;
    rp = inf_norm(Ax - z);
    rd = inf_norm(Px + prob_.q + Aty);
    prim_scale = std::max(inf_norm(Ax), inf_norm(z));
    dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(prob_.q)});
}

std::vector<signed char> Admm::active_set() const
{
    // -1 lower bound active, +1 upper, 2 equality, 0 free.
    std::vector<signed char> act(m_, 0);
    for (Eigen::Index i = 0; i < m_; ++i) {
        if (kind_[i] == RowKind::equality) {
            act[i] = 2;
        } else if (z_[i] - prob_.l[i] < -y_[i]) {
            act[i] = -1;
        } else if (prob_.u[i] - z_[i] < y_[i]) {
            act[i] = 1;
        }
    }
    return act;
}

bool Admm::polish(Vector& xp, Vector& yp, double& rp, double& rd)
{
    const std::vector<signed char> act = active_set();
    if (act == last_polish_set_) {
        return false;
    }
    last_polish_set_ = act;

    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m_; ++i) {
        if (act[i] != 0) {
            rows.push_back(i);
        }
    }
    const Eigen::Index na = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index dim = n_ + na;

    std::vector<Eigen::Index> slot(m_, -1);
    for (Eigen::Index k = 0; k < na; ++k) {
        slot[rows[k]] = k;
    }
    std::vector<Triplet> trip;
    trip.reserve(prob_.P.nonZeros() + 2 * prob_.A.nonZeros() + dim);
    for (int k = 0; k < prob_.P.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(prob_.P, k); it; ++it) {
            trip.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int k = 0; k < prob_.A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(prob_.A, k); it; ++it) {
            const Eigen::Index s = slot[it.row()];
            if (s >= 0) {
                trip.emplace_back(n_ + s, it.col(), it.value());
                trip.emplace_back(it.col(), n_ + s, it.value());
            }
        }
    }
    SparseMatrix K0(dim, dim);
    K0.setFromTriplets(trip.begin(), trip.end());
    SparseMatrix Kd = K0;
    for (Eigen::Index k = 0; k < dim; ++k) {
        Kd.coeffRef(k, k) += k < n_ ? set_.polish_delta : -set_.polish_delta;
    }
    Ldlt kkt(Kd);
    if (kkt.info() != Eigen::Success) {
        return false;
    }
    Vector rhs(dim);
    rhs.head(n_) = -prob_.q;
    for (Eigen::Index k = 0; k < na; ++k) {
        const Eigen::Index i = rows[k];
        rhs[n_ + k] = act[i] == 1 ? prob_.u[i] : prob_.l[i];
    }
    Vector sol = kkt.solve(rhs);
    for (int r = 0; r < set_.refine_steps; ++r) {
        const Vector res = rhs - K0 * sol;
        sol += kkt.solve(res);
    }
    if (!sol.allFinite()) {
        return false;
    }

    xp = sol.head(n_);
    yp = Vector::Zero(m_);
    for (Eigen::Index k = 0; k < na; ++k) {
        yp[rows[k]] = sol[n_ + k];
    }
    const Vector Ax = prob_.A * xp;
    rp = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
        rp = std::max({rp, prob_.l[i] - Ax[i], Ax[i] - prob_.u[i]});
    }
    rd = inf_norm(prob_.P * xp + prob_.q + At_ * yp);
    const double sign_tol = set_.eps_dual;
    for (Eigen::Index i = 0; i < m_; ++i) {
        if ((act[i] == -1 && yp[i] > sign_tol) || (act[i] == 1 && yp[i] < -sign_tol)) {
            return false;
        }
    }
    return rp <= set_.eps_prim && rd <= set_.eps_dual;
}

Result Admm::run()
{
    Result res;
    std::deque<double> history;
    for (int iter = 1; iter <= set_.max_iter; ++iter) {
        step();
        const double obj = objective(x_);
        history.push_back(obj);
        if (static_cast<int>(history.size()) > set_.obj_window) {
            history.pop_front();
        }
        res.iterations = iter;
        if (iter % set_.check_every != 0 && iter != set_.max_iter) {
            continue;
        }

        double rp = 0.0, rd = 0.0, ps = 0.0, ds = 0.0;
        residuals(x_, z_, y_, rp, rd, ps, ds);
        const auto [lo, hi] = std::minmax_element(history.begin(), history.end());
        const double change = *hi - *lo;
        const double obj_tol = set_.eps_obj * std::max(1.0, std::abs(obj));
        res.prim_res = rp;
        res.dual_res = rd;
        res.objective_change = change;
        if (rp <= set_.eps_prim && rd <= set_.eps_dual * (1.0 + ds) && change <= obj_tol &&
            static_cast<int>(history.size()) == set_.obj_window) {
            res.status = Status::solved;
            break;
        }

        if (set_.polish && iter >= 2 * set_.check_every) {
            Vector xp, yp;
            double prp = 0.0, prd = 0.0;
            if (polish(xp, yp, prp, prd)) {
                // Confirm the polished point is a fixed point of the
                // iteration: restart from it and watch the objective.
                const Vector xs = x_, zs = z_, ys = y_;
                x_ = xp;
                y_ = yp;
                z_ = (prob_.A * xp).cwiseMax(prob_.l).cwiseMin(prob_.u);
                const double base = objective(xp);
                double drift = 0.0;
                for (int k = 0; k < set_.obj_window; ++k) {
                    step();
                    drift = std::max(drift, std::abs(objective(x_) - base));
                }
                if (drift <= set_.eps_obj * std::max(1.0, std::abs(base))) {
                    x_ = xp;
                    y_ = yp;
                    res.status = Status::solved_polished;
                    res.polished = true;
                    res.prim_res = prp;
                    res.dual_res = prd;
                    res.objective_change = drift;
                    break;
                }
                x_ = xs;
                z_ = zs;
                y_ = ys;
            }
        }

        // Rebalance primal and dual progress. Each change doubles the wait
        // before the next one so rho settles.
        if (iter < next_adapt_) {
            continue;
        }
        const double denom_p = std::max(ps, 1e-30);
        const double denom_d = std::max(ds, 1e-30);
        const double ratio = std::sqrt((rp / denom_p) / std::max(rd / denom_d, 1e-30));
        const double proposed = std::clamp(rho_ * ratio, kRhoMin, kRhoMax);
        if (std::isfinite(proposed) && (proposed > 5.0 * rho_ || proposed < 0.2 * rho_)) {
            rho_ = proposed;
            factor();
            adapt_gap_ *= 2;
            next_adapt_ = iter + adapt_gap_;
        }
    }
    res.x = x_;
    res.y = y_;
    res.objective = objective(x_);
    res.refactorizations = refactorizations_;
    return res;
}

}  // namespace

std::string_view to_string(Status s)
{
    switch (s) {
    case Status::solved:
        return "solved";
    case Status::solved_polished:
        return "solved_polished";
    case Status::max_iterations:
        return "max_iterations";
    }
    return "unknown";
}

Result solve(const QuadraticProgram& prob, const Settings& settings)
{
    Admm admm(prob, settings);
    return admm.run();
}

}  // namespace nemopt::qp
