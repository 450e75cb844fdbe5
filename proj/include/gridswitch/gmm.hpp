#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace gridswitch {

class GmmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One Gaussian over the joint (X, y) space with the conditional-regression
/// pieces cached.
struct GmmComponent {
    double weight = 0.0;
    Eigen::VectorXd mean;  // d + 1, margin last
    Eigen::MatrixXd cov;   // (d + 1) x (d + 1)

    Eigen::VectorXd mu_x;
    double mu_y = 0.0;
    Eigen::MatrixXd sxx_inv;
    Eigen::VectorXd beta;  // (Sigma_YX Sigma_XX^-1)^T
    double log_norm_x = 0.0;  // log of the Gaussian normalizer of the X marginal
};

/// Mixture in the original parameter coordinates. Immutable after construction.
class GmmModel {
public:
    GmmModel() = default;
    /// Builds the cached partitions. Weights are used as given.
    GmmModel(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
             std::vector<Eigen::MatrixXd> covs);

    int k() const { return static_cast<int>(comps_.size()); }
    int input_dim() const { return dim_; }
    const std::vector<GmmComponent>& components() const { return comps_; }

    /// Fit diagnostics (not serialized).
    double log_likelihood = 0.0;
    std::vector<double> log_likelihood_history;  // per-sample, standardized space
    int iterations = 0;

private:
    int dim_ = 0;
    std::vector<GmmComponent> comps_;
};

struct EmOptions {
    int max_iter = 500;
    double tol = 1e-8;        // per-sample log-likelihood gain
    double reg_floor = 1e-8;  // added to covariance diagonals (standardized units)
};

/// EM with k-means++ seeding on standardized data. X is n x d, y has n entries.
GmmModel fit_em(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k, std::uint64_t seed,
                const EmOptions& opts = {});

Eigen::VectorXd responsibilities(const GmmModel& model, const Eigen::VectorXd& x);
double predict_margin(const GmmModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd margin_gradient(const GmmModel& model, const Eigen::VectorXd& x);

struct KSelection {
    int k = 1;
    std::vector<double> bic;  // index k - 1
    GmmModel model;           // best restart at the selected k
};

/// Fits K = 1..k_max with `restarts` seeded restarts each and keeps the BIC minimizer.
KSelection select_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k_max,
                    std::uint64_t seed, int restarts = 5, const EmOptions& opts = {});

double r_squared(const GmmModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Self-describing text format at 17 significant digits (exact round trip).
void write_gmm(std::ostream& out, const GmmModel& model);
GmmModel read_gmm(std::istream& in);

}  // namespace gridswitch
