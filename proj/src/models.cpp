#include "selrec/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "selrec/errors.hpp"
#include "selrec/stats.hpp"

namespace selrec {

namespace {

constexpr double kScoreTol = 1e-8;
constexpr int kMaxIterations = 50;
constexpr int kMaxHalvings = 10;
constexpr double kDivergenceBound = 50.0;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& covariates) {
    Eigen::MatrixXd Z(covariates.rows(), covariates.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(covariates.cols()) = covariates;
    return Z;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Shared Newton loop: obj must provide value(), gradient(), information()
// and a finite() predicate for candidate iterates.
template <class Objective, class DivergencePredicate>
void newton_fit(const Objective& obj, FittedModel& model, Eigen::VectorXd w,
                DivergencePredicate diverged) {
    const auto dim = w.size();
    double cur_value = obj.value(w);
    if (!std::isfinite(cur_value)) {
        model.status = FitStatus::Singular;
        model.coefficients = std::move(w);
        return;
    }
    for (int it = 0; it < kMaxIterations; ++it) {
        // Checked before the score test: near a separated or monotone
        // likelihood the score vanishes exponentially in |w|, so a small
        // gradient alone must not be read as convergence.
        if (diverged(w)) break;  // predicate sets model.status itself
        const Eigen::VectorXd g = obj.gradient(w);
        if (!all_finite(g)) {
            model.status = FitStatus::Singular;
            break;
        }
        if (g.lpNorm<Eigen::Infinity>() < kScoreTol) {
            model.status = FitStatus::Converged;
            model.converged = true;
            break;
        }
        const Eigen::MatrixXd info = obj.information(w);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        const double dmax = ldlt.vectorD().maxCoeff();
        const double dmin = ldlt.vectorD().minCoeff();
        if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || dmin <= 1e-10 * dmax) {
            model.status = FitStatus::Singular;
            break;
        }
        const Eigen::VectorXd step = ldlt.solve(g);
        if (!all_finite(step)) {
            model.status = FitStatus::Singular;
            break;
        }
        double scale = 1.0;
        Eigen::VectorXd candidate(dim);
        double cand_value = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int half = 0; half <= kMaxHalvings; ++half) {
            candidate = w + scale * step;
            cand_value = obj.value(candidate);
            if (std::isfinite(cand_value) &&
                cand_value >= cur_value - 1e-10 * (1.0 + std::fabs(cur_value))) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            model.status = FitStatus::MaxIterations;
            break;
        }
        w = candidate;
        cur_value = cand_value;
        model.iterations = it + 1;
        if (diverged(w)) break;  // predicate sets model.status itself
    }
    model.coefficients = w;
    model.loglik = cur_value;
    if (model.converged) {
        const Eigen::MatrixXd info = obj.information(w);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        const double dmax = ldlt.vectorD().maxCoeff();
        const double dmin = ldlt.vectorD().minCoeff();
        if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || dmin <= 1e-10 * dmax) {
            model.status = FitStatus::Singular;
            model.converged = false;
            return;
        }
        model.covariance =
            ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
        model.wald_z.resize(dim);
        model.p_values.resize(dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            model.wald_z[j] = model.coefficients[j] / std::sqrt(model.covariance(j, j));
            model.p_values[j] = two_sided_p(model.wald_z[j]);
        }
    }
}

}  // namespace

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& design,
                                     const Eigen::VectorXd& labels)
    : Z(design), y01(labels.size()) {
    if (design.rows() != labels.size()) {
        throw LengthMismatch("logistic: label length does not match design rows");
    }
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1.0 && labels[i] != -1.0) {
            throw InvalidValue("logistic labels must be +1 or -1");
        }
        y01[i] = labels[i] == 1.0 ? 1.0 : 0.0;
    }
}

double LogisticObjective::value(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd eta = Z * w;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log sigma(t) = -log(1 + exp(-t)), computed without overflow.
        const double t = (2.0 * y01[i] - 1.0) * eta[i];
        ll += t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
    }
    return ll;
}

Eigen::VectorXd LogisticObjective::gradient(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd eta = Z * w;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double mu = 1.0 / (1.0 + std::exp(-eta[i]));
        resid[i] = y01[i] - mu;
    }
    return Z.transpose() * resid;
}

Eigen::MatrixXd LogisticObjective::information(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd eta = Z * w;
    Eigen::VectorXd var(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double mu = 1.0 / (1.0 + std::exp(-eta[i]));
        var[i] = mu * (1.0 - mu);
    }
    return Z.transpose() * var.asDiagonal() * Z;
}

namespace {

// A weight vector that classifies every row correctly with strictly positive
// margin is a certificate that the labels are linearly separable, so the
// likelihood has no finite maximizer regardless of how small |w| still is.
bool separates_labels(const LogisticObjective& obj, const Eigen::VectorXd& w) {
    const Eigen::VectorXd eta = obj.Z * w;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double margin = obj.y01[i] > 0.5 ? eta[i] : -eta[i];
        if (!(margin > 0.0)) return false;
    }
    return eta.size() > 0;
}

}  // namespace

FittedModel try_fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& labels) {
    const LogisticObjective obj(with_intercept(covariates), labels);
    FittedModel model;
    model.kind = ModelKind::Logistic;
    newton_fit(obj, model, Eigen::VectorXd::Zero(covariates.cols() + 1),
               [&model, &obj](const Eigen::VectorXd& w) {
                   if (w.lpNorm<Eigen::Infinity>() > kDivergenceBound ||
                       separates_labels(obj, w)) {
                       model.status = FitStatus::Separation;
                       return true;
                   }
                   return false;
               });
    return model;
}

FittedModel fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& labels) {
    FittedModel model = try_fit_logistic(covariates, labels);
    switch (model.status) {
        case FitStatus::Converged:
            return model;
        case FitStatus::Separation:
            throw SeparationDetected("logistic coefficients diverged; labels look separable");
        case FitStatus::Singular:
            throw SingularInformation("logistic information matrix is singular");
        default:
            throw DidNotConverge("logistic fit did not converge in " +
                                 std::to_string(kMaxIterations) + " iterations");
    }
}

CoxObjective::CoxObjective(const Eigen::MatrixXd& design, const Eigen::VectorXd& time,
                           std::span<const unsigned char> event, CoxTies ties)
    : X(design),
      times(time.data(), time.data() + time.size()),
      events(event.begin(), event.end()),
      ties(ties) {
    const std::size_t n = static_cast<std::size_t>(design.rows());
    if (times.size() != n || events.size() != n) {
        throw LengthMismatch("cox: time/event length does not match design rows");
    }
    std::size_t n_events = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(times[i] > 0.0) || !std::isfinite(times[i])) {
            throw InvalidValue("cox: survival times must be positive and finite");
        }
        if (events[i] > 1) throw InvalidValue("cox: event indicators must be 0 or 1");
        n_events += events[i];
    }
    if (n_events == 0) throw NoEvents("cox: no events in the sample");

    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) return times[a] < times[b];
        return a < b;
    });
    group_start.push_back(0);
    for (std::size_t k = 1; k < n; ++k) {
        if (times[order[k]] != times[order[k - 1]]) group_start.push_back(k);
    }
    group_start.push_back(n);
}

bool CoxObjective::evaluate(const Eigen::VectorXd& beta, double* value,
                            Eigen::VectorXd* gradient, Eigen::MatrixXd* information) const {
    const Eigen::Index d = X.cols();
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd risk(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        risk[i] = std::exp(eta[i]);
        if (!std::isfinite(risk[i])) return false;
    }

    double ll = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
    const bool want_grad = gradient != nullptr || information != nullptr;

    // Suffix sums over the risk set, updated while walking the tied-time
    // groups from the largest time down.
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);

    const std::size_t n_groups = group_start.size() - 1;
    for (std::size_t g = n_groups; g-- > 0;) {
        const std::size_t lo = group_start[g];
        const std::size_t hi = group_start[g + 1];
        std::size_t m = 0;
        double d0 = 0.0;
        Eigen::VectorXd d1 = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t i = order[k];
            const double r = risk[i];
            const auto xi = X.row(i);
            s0 += r;
            if (want_grad) {
                s1.noalias() += r * xi.transpose();
                s2.noalias() += r * xi.transpose() * xi;
            }
            if (events[i]) {
                ++m;
                ll += eta[i];
                d0 += r;
                if (want_grad) {
                    grad.noalias() += xi.transpose();
                    d1.noalias() += r * xi.transpose();
                    d2.noalias() += r * xi.transpose() * xi;
                }
            }
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double frac =
                ties == CoxTies::Efron ? static_cast<double>(k) / static_cast<double>(m) : 0.0;
            const double denom = s0 - frac * d0;
            if (!(denom > 0.0) || !std::isfinite(denom)) return false;
            ll -= std::log(denom);
            if (want_grad) {
                const Eigen::VectorXd u = (s1 - frac * d1) / denom;
                grad.noalias() -= u;
                info.noalias() += (s2 - frac * d2) / denom - u * u.transpose();
            }
        }
    }

    if (value != nullptr) *value = ll;
    if (gradient != nullptr) *gradient = grad;
    if (information != nullptr) *information = info;
    return true;
}

double CoxObjective::value(const Eigen::VectorXd& beta) const {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (!evaluate(beta, &v, nullptr, nullptr)) {
        return -std::numeric_limits<double>::infinity();
    }
    return v;
}

Eigen::VectorXd CoxObjective::gradient(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd g;
    double v;
    if (!evaluate(beta, &v, &g, nullptr)) {
        g = Eigen::VectorXd::Constant(X.cols(), std::numeric_limits<double>::quiet_NaN());
    }
    return g;
}

Eigen::MatrixXd CoxObjective::information(const Eigen::VectorXd& beta) const {
    Eigen::MatrixXd h;
    double v;
    Eigen::VectorXd g;
    if (!evaluate(beta, &v, &g, &h)) {
        h = Eigen::MatrixXd::Constant(X.cols(), X.cols(),
                                      std::numeric_limits<double>::quiet_NaN());
    }
    return h;
}

namespace {

// If some linear predictor ranks every untied event strictly above the rest
// of its risk set, the partial likelihood climbs toward its supremum only as
// the coefficients run off to infinity, so no finite maximizer exists. Tied
// event times make the certificate inconclusive and the test abstains.
bool riskset_separated(const CoxObjective& obj, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = obj.X * beta;
    const std::size_t n = obj.order.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    // suffix[k] = max eta over rows entering the data at position >= k in
    // ascending time order, i.e. the strictly-later part of a risk set.
    std::vector<double> suffix(n + 1, neg_inf);
    for (std::size_t k = n; k-- > 0;) {
        suffix[k] = std::max(suffix[k + 1],
                             eta[static_cast<Eigen::Index>(obj.order[k])]);
    }
    bool any_constraint = false;
    const std::size_t n_groups = obj.group_start.size() - 1;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::size_t lo = obj.group_start[g];
        const std::size_t hi = obj.group_start[g + 1];
        std::size_t n_events = 0;
        double event_eta = neg_inf;
        double censored_max = neg_inf;
        for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t row = obj.order[k];
            const double e = eta[static_cast<Eigen::Index>(row)];
            if (obj.events[row] != 0) {
                ++n_events;
                event_eta = e;
            } else {
                censored_max = std::max(censored_max, e);
            }
        }
        if (n_events == 0) continue;
        if (n_events > 1) return false;
        const double rest = std::max(censored_max, suffix[hi]);
        if (rest == neg_inf) continue;  // event is alone in its risk set
        if (!(event_eta > rest)) return false;
        any_constraint = true;
    }
    return any_constraint;
}

}  // namespace

FittedModel try_fit_cox(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& time,
                        std::span<const unsigned char> event, CoxTies ties) {
    const CoxObjective obj(covariates, time, event, ties);
    FittedModel model;
    model.kind = ModelKind::Cox;
    newton_fit(obj, model, Eigen::VectorXd::Zero(covariates.cols()),
               [&model, &obj](const Eigen::VectorXd& beta) {
                   if (beta.lpNorm<Eigen::Infinity>() > kDivergenceBound ||
                       riskset_separated(obj, beta)) {
                       model.status = FitStatus::Monotone;
                       return true;
                   }
                   return false;
               });
    return model;
}

FittedModel fit_cox(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& time,
                    std::span<const unsigned char> event, CoxTies ties) {
    FittedModel model = try_fit_cox(covariates, time, event, ties);
    switch (model.status) {
        case FitStatus::Converged:
            return model;
        case FitStatus::Monotone:
            throw MonotoneLikelihood("cox partial likelihood appears monotone");
        case FitStatus::Singular:
            throw SingularInformation("cox information matrix is singular");
        default:
            throw DidNotConverge("cox fit did not converge in " +
                                 std::to_string(kMaxIterations) + " iterations");
    }
}

SignificanceReport significance(const FittedModel& model, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidValue("alpha must lie in (0, 1)");
    if (!model.converged) throw UnconvergedModel("significance needs a converged model");
    SignificanceReport report;
    report.alpha = alpha;
    report.significant.resize(static_cast<std::size_t>(model.p_values.size()));
    for (Eigen::Index j = 0; j < model.p_values.size(); ++j) {
        report.significant[static_cast<std::size_t>(j)] = model.p_values[j] < alpha ? 1 : 0;
    }
    return report;
}

Eigen::VectorXd standard_errors(const FittedModel& model) {
    if (!model.converged) throw UnconvergedModel("standard errors need a converged model");
    return model.covariance.diagonal().cwiseSqrt();
}

Eigen::MatrixXd covariate_matrix(const Pool& pool) {
    Eigen::MatrixXd X(pool.size(), pool.dim());
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        auto col = pool.column(j);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
        }
    }
    return X;
}

FittedModel fit_pool_model(const Pool& pool, CoxTies ties) {
    const Eigen::MatrixXd X = covariate_matrix(pool);
    if (pool.outcome_kind() == OutcomeKind::Binary) {
        auto y = pool.binary_outcome();
        Eigen::VectorXd labels(static_cast<Eigen::Index>(y.size()));
        for (std::size_t i = 0; i < y.size(); ++i) {
            labels[static_cast<Eigen::Index>(i)] = y[i];
        }
        return fit_logistic(X, labels);
    }
    if (pool.outcome_kind() == OutcomeKind::Survival) {
        auto t = pool.survival_time();
        Eigen::VectorXd time(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            time[static_cast<Eigen::Index>(i)] = t[i];
        }
        return fit_cox(X, time, pool.survival_event(), ties);
    }
    throw SpecMismatch("pool carries no outcome to fit");
}

}  // namespace selrec
