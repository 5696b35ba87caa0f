#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "selrec/pool.hpp"

namespace selrec {

enum class ModelKind { Logistic, Cox };
enum class CoxTies { Efron, Breslow };

enum class FitStatus {
    Converged,
    MaxIterations,  // Newton loop exhausted without meeting the score tolerance
    Separation,     // logistic coefficients diverged (perfectly separable labels)
    Monotone,       // Cox partial likelihood is monotone in some coefficient
    Singular,       // observed information is numerically rank deficient
};

struct FittedModel {
    ModelKind kind = ModelKind::Logistic;
    FitStatus status = FitStatus::MaxIterations;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
    // Logistic: [intercept, slopes...]; Cox: [slopes...] (no intercept).
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;  // inverse observed information
    Eigen::VectorXd wald_z;
    Eigen::VectorXd p_values;
};

// Log likelihood of the +/-1-label logistic model, with analytic gradient
// and Hessian. The design matrix already carries the intercept column.
// Exposed so tests can check the fitted score and curvature directly.
struct LogisticObjective {
    LogisticObjective(const Eigen::MatrixXd& design, const Eigen::VectorXd& labels);

    double value(const Eigen::VectorXd& w) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;
    // Negated Hessian (the observed information), positive semi-definite.
    Eigen::MatrixXd information(const Eigen::VectorXd& w) const;

    Eigen::MatrixXd Z;
    Eigen::VectorXd y01;
};

// Cox partial log likelihood with Efron or Breslow handling of tied event
// times, evaluated with running risk-set sums in one pass over time order.
struct CoxObjective {
    CoxObjective(const Eigen::MatrixXd& design, const Eigen::VectorXd& time,
                 std::span<const unsigned char> event, CoxTies ties);

    // Returns false when exp(linear predictor) overflows, which only happens
    // for diverging coefficients. Null output pointers skip that part.
    bool evaluate(const Eigen::VectorXd& beta, double* value, Eigen::VectorXd* gradient,
                  Eigen::MatrixXd* information) const;

    double value(const Eigen::VectorXd& beta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
    Eigen::MatrixXd information(const Eigen::VectorXd& beta) const;

    Eigen::MatrixXd X;
    std::vector<double> times;
    std::vector<unsigned char> events;
    CoxTies ties = CoxTies::Efron;
    // Row ids sorted by ascending time; boundaries of tied-time groups.
    std::vector<std::size_t> order;
    std::vector<std::size_t> group_start;
};

// Newton-Raphson fits. The try_ variants report failures through
// FittedModel::status; the plain variants throw instead
// (DidNotConverge, SeparationDetected, MonotoneLikelihood,
// SingularInformation, NoEvents).
FittedModel try_fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& labels);
FittedModel fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& labels);

FittedModel try_fit_cox(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& time,
                        std::span<const unsigned char> event, CoxTies ties = CoxTies::Efron);
FittedModel fit_cox(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& time,
                    std::span<const unsigned char> event, CoxTies ties = CoxTies::Efron);

struct SignificanceReport {
    double alpha = 0.05;
    std::vector<char> significant;  // aligned with FittedModel::coefficients
};

SignificanceReport significance(const FittedModel& model, double alpha = 0.05);

Eigen::VectorXd standard_errors(const FittedModel& model);

// Glue for pools: covariates in spec order as an n-by-d matrix, and a fit
// dispatched on the pool's outcome kind.
Eigen::MatrixXd covariate_matrix(const Pool& pool);
FittedModel fit_pool_model(const Pool& pool, CoxTies ties = CoxTies::Efron);

}  // namespace selrec
