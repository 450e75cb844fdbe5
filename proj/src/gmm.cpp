#include "gridswitch/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace gridswitch {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

struct Gaussian {
    Eigen::VectorXd mean;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm = 0.0;

    Gaussian(Eigen::VectorXd m, const Eigen::MatrixXd& cov) : mean(std::move(m)), llt(cov) {
        if (llt.info() != Eigen::Success) throw GmmError("covariance is not positive definite");
        const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        log_norm = -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det);
    }
    double log_pdf(const Eigen::VectorXd& z) const {
        const Eigen::VectorXd w = llt.matrixL().solve(z - mean);
        return log_norm - 0.5 * w.squaredNorm();
    }
};

// k-means++ seeding followed by one hard assignment for initial covariances.
void seed_components(const Eigen::MatrixXd& z, int k, std::mt19937_64& rng, double reg,
                     std::vector<double>& w, std::vector<Eigen::VectorXd>& mu,
                     std::vector<Eigen::MatrixXd>& cov) {
    const Eigen::Index n = z.rows(), dim = z.cols();
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> centers{pick(rng)};
    Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < k) {
        for (Eigen::Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (z.row(i) - z.row(centers.back())).squaredNorm());
        const double total = d2.sum();
        Eigen::Index next = pick(rng);
        if (total > 0.0) {
            std::uniform_real_distribution<double> uni(0.0, total);
            double r = uni(rng);
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    next = i;
                    break;
                }
            }
        }
        centers.push_back(next);
    }

    std::vector<std::vector<Eigen::Index>> members(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double d = (z.row(i) - z.row(centers[c])).squaredNorm();
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        members[best].push_back(i);
    }
    w.assign(k, 0.0);
    mu.assign(k, Eigen::VectorXd());
    cov.assign(k, Eigen::MatrixXd());
    for (int c = 0; c < k; ++c) {
        const auto& m = members[c];
        mu[c] = z.row(centers[c]).transpose();
        Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim, dim);
        if (m.size() > static_cast<std::size_t>(dim)) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
            for (auto i : m) mean += z.row(i).transpose();
            mean /= static_cast<double>(m.size());
            s.setZero();
            for (auto i : m) {
                const Eigen::VectorXd dz = z.row(i).transpose() - mean;
                s += dz * dz.transpose();
            }
            s /= static_cast<double>(m.size());
            mu[c] = mean;
        }
        s.diagonal().array() += std::max(reg, 1e-6);
        cov[c] = s;
        w[c] = std::max<double>(static_cast<double>(m.size()), 1.0);
    }
    double sw = 0.0;
    for (double v : w) sw += v;
    for (double& v : w) v /= sw;
}

}  // namespace

GmmModel::GmmModel(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                   std::vector<Eigen::MatrixXd> covs) {
    if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size())
        throw GmmError("GMM needs matching, non-empty weight/mean/covariance lists");
    const Eigen::Index joint = means.front().size();
    if (joint < 2) throw GmmError("GMM joint dimension must be at least 2");
    dim_ = static_cast<int>(joint - 1);
    for (std::size_t c = 0; c < weights.size(); ++c) {
        if (means[c].size() != joint || covs[c].rows() != joint || covs[c].cols() != joint)
            throw GmmError("GMM component dimensions differ");
        if (!(weights[c] > 0.0)) throw GmmError("GMM weights must be positive");
        GmmComponent g;
        g.weight = weights[c];
        g.mean = means[c];
        g.cov = covs[c];
        const Eigen::Index d = dim_;
        g.mu_x = g.mean.head(d);
        g.mu_y = g.mean[d];
        const Eigen::MatrixXd sxx = g.cov.topLeftCorner(d, d);
        Eigen::LLT<Eigen::MatrixXd> llt(sxx);
        if (llt.info() != Eigen::Success) throw GmmError("component X covariance is not positive definite");
        g.sxx_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
        g.beta = llt.solve(Eigen::VectorXd(g.cov.topRightCorner(d, 1)));
        const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        g.log_norm_x = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
        comps_.push_back(std::move(g));
    }
}

namespace {

Eigen::VectorXd log_weighted_densities(const GmmModel& model, const Eigen::VectorXd& x) {
    const auto& comps = model.components();
    Eigen::VectorXd lw(static_cast<Eigen::Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const Eigen::VectorXd dx = x - comps[c].mu_x;
        lw[static_cast<Eigen::Index>(c)] = std::log(comps[c].weight) + comps[c].log_norm_x -
                                           0.5 * dx.dot(comps[c].sxx_inv * dx);
    }
    return lw;
}

}  // namespace

Eigen::VectorXd responsibilities(const GmmModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim()) throw GmmError("input dimension does not match the model");
    const Eigen::VectorXd lw = log_weighted_densities(model, x);
    return (lw.array() - log_sum_exp(lw)).exp();
}

double predict_margin(const GmmModel& model, const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = responsibilities(model, x);
    double f = 0.0;
    for (int c = 0; c < model.k(); ++c) {
        const auto& comp = model.components()[c];
        f += g[c] * (comp.mu_y + comp.beta.dot(x - comp.mu_x));
    }
    return f;
}

Eigen::VectorXd margin_gradient(const GmmModel& model, const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = responsibilities(model, x);
    const auto& comps = model.components();
    const Eigen::Index d = model.input_dim();
    std::vector<Eigen::VectorXd> pull(comps.size());
    Eigen::VectorXd mean_pull = Eigen::VectorXd::Zero(d);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        pull[c] = comps[c].sxx_inv * (x - comps[c].mu_x);
        mean_pull += g[static_cast<Eigen::Index>(c)] * pull[c];
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const double gc = g[static_cast<Eigen::Index>(c)];
        const double m = comps[c].mu_y + comps[c].beta.dot(x - comps[c].mu_x);
        grad += gc * (mean_pull - pull[c]) * m + gc * comps[c].beta;
    }
    return grad;
}

GmmModel fit_em(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k, std::uint64_t seed,
                const EmOptions& opts) {
    if (k < 1) throw GmmError("component count must be at least 1");
    const Eigen::Index n = x.rows();
    if (y.size() != n) throw GmmError("X and y have different lengths");
    if (n < 10 * static_cast<Eigen::Index>(k))
        throw GmmError("dataset too small: need at least 10 samples per component");
    const Eigen::Index dim = x.cols() + 1;
    Eigen::MatrixXd z(n, dim);
    z << x, y;
    if (!z.allFinite()) throw GmmError("dataset contains non-finite values");

    const Eigen::RowVectorXd mean = z.colwise().mean();
    Eigen::RowVectorXd scale = ((z.rowwise() - mean).array().square().colwise().sum() /
                                static_cast<double>(n))
                                   .sqrt();
    if (scale.maxCoeff() <= 0.0) throw GmmError("degenerate dataset: zero variance in every dimension");
    for (Eigen::Index j = 0; j < dim; ++j)
        if (scale[j] <= 0.0) scale[j] = 1.0;
    const Eigen::MatrixXd zs = (z.rowwise() - mean).array().rowwise() / scale.array();

    std::mt19937_64 rng(seed);
    std::vector<double> w;
    std::vector<Eigen::VectorXd> mu;
    std::vector<Eigen::MatrixXd> cov;
    seed_components(zs, k, rng, opts.reg_floor, w, mu, cov);

    Eigen::MatrixXd resp(n, k);
    std::vector<double> history;
    double prev = -std::numeric_limits<double>::infinity();
    std::vector<double> w_prev = w;
    std::vector<Eigen::VectorXd> mu_prev = mu;
    std::vector<Eigen::MatrixXd> cov_prev = cov;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        // E-step, vectorized per component.
        Eigen::MatrixXd logp(n, k);
        for (int c = 0; c < k; ++c) {
            const Gaussian g(mu[c], cov[c]);
            const Eigen::MatrixXd centered = (zs.rowwise() - mu[c].transpose()).transpose();
            const Eigen::MatrixXd white = g.llt.matrixL().solve(centered);
            logp.col(c) = (std::log(w[c]) + g.log_norm - 0.5 * white.colwise().squaredNorm().array())
                              .transpose();
        }
        const Eigen::VectorXd row_max = logp.rowwise().maxCoeff();
        const Eigen::VectorXd lse =
            row_max.array() + (logp.colwise() - row_max).array().exp().rowwise().sum().log();
        resp = (logp.colwise() - lse).array().exp();
        double ll = lse.sum();
        ll /= static_cast<double>(n);
        // The covariance floor makes each M-step slightly inexact, so a step
        // can lose likelihood near convergence; keep the previous parameters.
        if (ll < prev) {
            w = w_prev;
            mu = mu_prev;
            cov = cov_prev;
            break;
        }
        history.push_back(ll);
        if (ll - prev < opts.tol) break;
        prev = ll;
        w_prev = w;
        mu_prev = mu;
        cov_prev = cov;

        // M-step.
        for (int c = 0; c < k; ++c) {
            const double nk = std::max(resp.col(c).sum(), 1e-10);
            w[c] = nk / static_cast<double>(n);
            mu[c] = (zs.transpose() * resp.col(c)) / nk;
            const Eigen::MatrixXd dz = zs.rowwise() - mu[c].transpose();
            const Eigen::MatrixXd weighted = dz.array().colwise() * resp.col(c).array();
            cov[c] = (weighted.transpose() * dz) / nk;
            cov[c].diagonal().array() += opts.reg_floor;
        }
        double sw = 0.0;
        for (double v : w) sw += v;
        for (double& v : w) v /= sw;
    }

    // Back to original coordinates: z = mean + scale .* zs.
    std::vector<Eigen::VectorXd> mo(k);
    std::vector<Eigen::MatrixXd> co(k);
    const Eigen::VectorXd s = scale.transpose();
    for (int c = 0; c < k; ++c) {
        mo[c] = mean.transpose() + s.cwiseProduct(mu[c]);
        co[c] = s.asDiagonal() * cov[c] * s.asDiagonal();
    }
    GmmModel model(w, mo, co);
    model.log_likelihood = history.back() * static_cast<double>(n) -
                           static_cast<double>(n) * scale.array().log().sum();
    model.log_likelihood_history = std::move(history);
    model.iterations = iter;
    return model;
}

KSelection select_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k_max,
                    std::uint64_t seed, int restarts, const EmOptions& opts) {
    if (k_max < 1) throw GmmError("k_max must be at least 1");
    if (restarts < 1) throw GmmError("restarts must be at least 1");
    const Eigen::Index n = x.rows();
    k_max = std::min<int>(k_max, static_cast<int>(n / 10));
    if (k_max < 1) throw GmmError("dataset too small for a mixture fit");

    const int jobs = k_max * restarts;
    std::vector<GmmModel> fits(jobs);
    std::vector<char> ok(jobs, 0);
#pragma omp parallel for schedule(dynamic, 1)
    for (int j = 0; j < jobs; ++j) {
        const int k = j / restarts + 1;
        std::seed_seq seq{seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j % restarts)};
        std::mt19937_64 gen(seq);
        try {
            fits[j] = fit_em(x, y, k, gen(), opts);
            ok[j] = 1;
        } catch (const GmmError&) {
        }
    }

    const double dim = static_cast<double>(x.cols() + 1);
    KSelection sel;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= k_max; ++k) {
        int best = -1;
        for (int r = 0; r < restarts; ++r) {
            const int j = (k - 1) * restarts + r;
            if (ok[j] && (best < 0 || fits[j].log_likelihood > fits[best].log_likelihood)) best = j;
        }
        if (best < 0) {
            sel.bic.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        const double params = (k - 1) + k * dim + k * dim * (dim + 1) / 2.0;
        const double bic = -2.0 * fits[best].log_likelihood + params * std::log(static_cast<double>(n));
        sel.bic.push_back(bic);
        if (bic < best_bic) {
            best_bic = bic;
            sel.k = k;
            sel.model = fits[best];
        }
    }
    if (!std::isfinite(best_bic)) throw GmmError("every mixture fit failed");
    return sel;
}

double r_squared(const GmmModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size() || y.size() < 2) throw GmmError("r_squared needs matching, non-trivial data");
    const double ybar = y.mean();
    const double ss_tot = (y.array() - ybar).square().sum();
    if (!(ss_tot > 0.0)) throw GmmError("r_squared undefined: zero variance in y");
    double ss_res = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double e = y[i] - predict_margin(model, x.row(i).transpose());
        ss_res += e * e;
    }
    return 1.0 - ss_res / ss_tot;
}

void write_gmm(std::ostream& out, const GmmModel& model) {
    const auto old = out.precision(17);
    const auto& comps = model.components();
    const Eigen::Index dim = model.input_dim() + 1;
    out << "gmm\nk = " << model.k() << "\njoint_dim = " << dim << '\n';
    for (const auto& c : comps) {
        out << "component\nweight = " << c.weight << "\nmean =";
        for (Eigen::Index i = 0; i < dim; ++i) out << ' ' << c.mean[i];
        out << "\ncov =";
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) out << ' ' << c.cov(i, j);
        out << '\n';
    }
    out.precision(old);
}

GmmModel read_gmm(std::istream& in) {
    auto expect = [&](const std::string& word) {
        std::string tok;
        if (!(in >> tok) || tok != word) throw GmmError("malformed GMM file: expected '" + word + "'");
    };
    expect("gmm");
    int k = 0;
    Eigen::Index dim = 0;
    expect("k");
    expect("=");
    in >> k;
    expect("joint_dim");
    expect("=");
    in >> dim;
    if (!in || k < 1 || dim < 2) throw GmmError("malformed GMM header");
    std::vector<double> w(k);
    std::vector<Eigen::VectorXd> mu(k, Eigen::VectorXd(dim));
    std::vector<Eigen::MatrixXd> cov(k, Eigen::MatrixXd(dim, dim));
    for (int c = 0; c < k; ++c) {
        expect("component");
        expect("weight");
        expect("=");
        in >> w[c];
        expect("mean");
        expect("=");
        for (Eigen::Index i = 0; i < dim; ++i) in >> mu[c][i];
        expect("cov");
        expect("=");
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) in >> cov[c](i, j);
        if (!in) throw GmmError("malformed GMM component");
    }
    return GmmModel(w, mu, cov);
}

}  // namespace gridswitch
