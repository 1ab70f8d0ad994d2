#include "odeinf/semms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace odeinf {

namespace {

constexpr double kSlabFloor = 1e-12;
constexpr double kWeightFloor = 1e-10;

struct VariationalState {
    // Per predictor: component weights, slab posterior means (for gamma = -1
    // and +1), shared posterior variance, and the null-component moments
    // frozen at the prior values in force when the factor was last updated.
    Eigen::MatrixXd w;        // p x 3: (L, 0, R)
    Eigen::VectorXd m_neg, m_pos;
    Eigen::VectorXd var;      // 1/tau per predictor
    Eigen::VectorXd null_mean, null_var;
    Eigen::VectorXd b_mean;   // E[gamma u]
    Eigen::VectorXd b_sq;     // E[(gamma u)^2]
};

struct Hyper {
    double p_left, p_null, p_right;
    double mu_u, var_u;
    double var_e;
};

double elbo(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& col_sq,
            const VariationalState& st, const Hyper& h) {
    const int n = static_cast<int>(y.size());
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd residual = y - X * st.b_mean;
    double quad = residual.squaredNorm();
    for (int k = 0; k < p; ++k) quad += col_sq(k) * (st.b_sq(k) - st.b_mean(k) * st.b_mean(k));
    double value = -0.5 * n * std::log(2 * M_PI * h.var_e) - quad / (2 * h.var_e);

    const double log_pl = std::log(h.p_left), log_p0 = std::log(h.p_null),
                 log_pr = std::log(h.p_right);
    for (int k = 0; k < p; ++k) {
        double wl = st.w(k, 0), w0 = st.w(k, 1), wr = st.w(k, 2);
        auto xlogx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
        value += wl * log_pl + w0 * log_p0 + wr * log_pr;
        value -= xlogx(wl) + xlogx(w0) + xlogx(wr);
        // Slab prior cross-entropy minus entropy per component.
        auto gaussian_term = [&h](double mean, double var) {
            double cross = -0.5 * std::log(2 * M_PI * h.var_u) -
                           (var + (mean - h.mu_u) * (mean - h.mu_u)) / (2 * h.var_u);
            double entropy = 0.5 * std::log(2 * M_PI * M_E * var);
            return cross + entropy;
        };
        if (wl > 0) value += wl * gaussian_term(st.m_neg(k), st.var(k));
        if (wr > 0) value += wr * gaussian_term(st.m_pos(k), st.var(k));
        if (w0 > 0) value += w0 * gaussian_term(st.null_mean(k), st.null_var(k));
    }
    return value;
}

void refresh_moments(VariationalState& st, int k) {
    double wl = st.w(k, 0), wr = st.w(k, 2);
    st.b_mean(k) = wr * st.m_pos(k) - wl * st.m_neg(k);
    st.b_sq(k) = wr * (st.m_pos(k) * st.m_pos(k) + st.var(k)) +
                 wl * (st.m_neg(k) * st.m_neg(k) + st.var(k));
}

SemmsModel run_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& col_sq, VariationalState st, Hyper h,
                   const SemmsOptions& opt) {
    const int n = static_cast<int>(y.size());
    const int p = static_cast<int>(X.cols());

    SemmsModel model;
    Eigen::VectorXd residual = y - X * st.b_mean;
    double prev = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        residual = y - X * st.b_mean;  // guard against incremental drift
        // E-pass: coordinate updates of each variational factor.
        for (int k = 0; k < p; ++k) {
            if (col_sq(k) <= 0) continue;
            residual += X.col(k) * st.b_mean(k);
            double s = X.col(k).dot(residual);
            double tau = 1.0 / h.var_u + col_sq(k) / h.var_e;
            double m_pos = (h.mu_u / h.var_u + s / h.var_e) / tau;
            double m_neg_u = (h.mu_u / h.var_u - s / h.var_e) / tau;  // E[u | gamma=-1]
            double base = -0.5 * h.mu_u * h.mu_u / h.var_u - 0.5 * std::log(h.var_u * tau);
            double log_wl = std::log(h.p_left) + 0.5 * tau * m_neg_u * m_neg_u + base;
            double log_w0 = std::log(h.p_null);
            double log_wr = std::log(h.p_right) + 0.5 * tau * m_pos * m_pos + base;
            double mx = std::max({log_wl, log_w0, log_wr});
            double el = std::exp(log_wl - mx), e0 = std::exp(log_w0 - mx),
                   er = std::exp(log_wr - mx);
            double z = el + e0 + er;
            st.w(k, 0) = el / z;
            st.w(k, 1) = e0 / z;
            st.w(k, 2) = er / z;
            st.m_pos(k) = m_pos;
            st.m_neg(k) = m_neg_u;
            st.var(k) = 1.0 / tau;
            st.null_mean(k) = h.mu_u;
            st.null_var(k) = h.var_u;
            refresh_moments(st, k);
            residual -= X.col(k) * st.b_mean(k);
        }

        // M-step: mixture weights, slab moments, error variance.
        Eigen::RowVector3d wbar = st.w.colwise().mean();
        h.p_left = std::max(wbar(0), kWeightFloor);
        h.p_null = std::max(wbar(1), kWeightFloor);
        h.p_right = std::max(wbar(2), kWeightFloor);
        double total = h.p_left + h.p_null + h.p_right;
        h.p_left /= total;
        h.p_null /= total;
        h.p_right /= total;

        double eu = 0, eu2 = 0;
        for (int k = 0; k < p; ++k) {
            double mean_u = st.w(k, 0) * st.m_neg(k) + st.w(k, 2) * st.m_pos(k) +
                            st.w(k, 1) * st.null_mean(k);
            double mean_u2 =
                st.w(k, 0) * (st.m_neg(k) * st.m_neg(k) + st.var(k)) +
                st.w(k, 2) * (st.m_pos(k) * st.m_pos(k) + st.var(k)) +
                st.w(k, 1) * (st.null_mean(k) * st.null_mean(k) + st.null_var(k));
            eu += mean_u;
            eu2 += mean_u2;
        }
        h.mu_u = eu / p;
        h.var_u = eu2 / p - h.mu_u * h.mu_u;
        if (h.var_u < kSlabFloor)
            throw std::runtime_error(
                "semms_fit: slab variance collapsed below 1e-12; re-initialize with a different seed");

        double quad = residual.squaredNorm();
        for (int k = 0; k < p; ++k)
            quad += col_sq(k) * (st.b_sq(k) - st.b_mean(k) * st.b_mean(k));
        h.var_e = std::max(quad / n, 1e-300);

        double current = elbo(X, y, col_sq, st, h);
        model.objective_trace.push_back(current);
        model.iterations = iter + 1;
        if (iter > 0 && current - prev < opt.tol) {
            model.converged = true;
            prev = current;
            break;
        }
        prev = current;
    }

    model.p_left = h.p_left;
    model.p_null = h.p_null;
    model.p_right = h.p_right;
    model.slab_mean = h.mu_u;
    model.slab_variance = h.var_u;
    model.error_variance = h.var_e;
    model.posterior = st.w;
    model.posterior_mean = st.b_mean;
    return model;
}

}  // namespace

SemmsModel semms_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const SemmsOptions& opt) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n < 2 || p < 1) throw std::invalid_argument("semms_fit: degenerate problem");
    if (y.size() != n) throw std::invalid_argument("semms_fit: X/y row mismatch");

    Eigen::VectorXd col_sq(p);
    for (int k = 0; k < p; ++k) col_sq(k) = X.col(k).squaredNorm();

    // Correlation-based initialization: the strongest predictors seeded into
    // the signed components, the rest null.
    Eigen::VectorXd score(p);
    Eigen::VectorXd init_coef(p);
    for (int k = 0; k < p; ++k) {
        double s = col_sq(k) > 0 ? X.col(k).dot(y) / col_sq(k) : 0.0;
        init_coef(k) = s;
        score(k) = std::fabs(s) * std::sqrt(col_sq(k));
    }
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&score](int a, int b) { return score(a) > score(b); });
    int top = std::max(1, p / 5);

    const double sign_flip = opt.mirror_init ? -1.0 : 1.0;
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> jitter(0.0, 0.1);

    SemmsModel best;
    double best_objective = -std::numeric_limits<double>::infinity();
    bool have = false;
    std::string last_error;
    for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
        VariationalState st;
        st.w.resize(p, 3);
        st.m_neg.resize(p);
        st.m_pos.resize(p);
        st.var = Eigen::VectorXd::Constant(p, 1.0);
        st.null_mean.resize(p);
        st.null_var.resize(p);
        st.b_mean.resize(p);
        st.b_sq.resize(p);

        double mag_sum = 0;
        for (int r = 0; r < top; ++r) mag_sum += std::fabs(init_coef(order[r]));
        double mag = std::max(mag_sum / top, 0.1);

        Hyper h;
        h.p_left = 0.1;
        h.p_null = 0.8;
        h.p_right = 0.1;
        h.mu_u = mag;
        h.var_u = std::max(mag * mag, 0.1);
        double ybar_sq = y.squaredNorm() / n;
        h.var_e = std::max(ybar_sq / 2, 1e-6);

        for (int k = 0; k < p; ++k) {
            double noise = restart == 0 ? 0.0 : jitter(rng);
            double coef = sign_flip * init_coef(k);
            bool active = false;
            for (int r = 0; r < top; ++r)
                if (order[r] == k) active = true;
            if (active && coef > 0) {
                st.w(k, 0) = 0.05;
                st.w(k, 1) = 0.15 + noise * 0.1;
                st.w(k, 2) = 0.80 - noise * 0.1;
            } else if (active && coef < 0) {
                st.w(k, 0) = 0.80 - noise * 0.1;
                st.w(k, 1) = 0.15 + noise * 0.1;
                st.w(k, 2) = 0.05;
            } else {
                st.w(k, 0) = 0.05;
                st.w(k, 1) = 0.90;
                st.w(k, 2) = 0.05;
            }
            st.w.row(k) = st.w.row(k).cwiseMax(kWeightFloor);
            st.w.row(k) /= st.w.row(k).sum();
            double amp = std::fabs(coef) + (restart == 0 ? 0.0 : std::fabs(jitter(rng)));
            st.m_pos(k) = amp;
            st.m_neg(k) = amp;
            st.var(k) = 1.0;
            st.null_mean(k) = h.mu_u;
            st.null_var(k) = h.var_u;
            refresh_moments(st, k);
        }

        try {
            SemmsModel model = run_fit(X, y, col_sq, st, h, opt);
            double objective = model.objective_trace.empty()
                                   ? -std::numeric_limits<double>::infinity()
                                   : model.objective_trace.back();
            if (!have || objective > best_objective) {
                have = true;
                best_objective = objective;
                best = std::move(model);
            }
        } catch (const std::runtime_error& e) {
            last_error = e.what();
        }
    }
    if (!have) throw std::runtime_error(last_error.empty() ? "semms_fit: all restarts failed"
                                                           : last_error);
    return best;
}

SemmsSelection semms_select(const SemmsModel& model, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, double threshold, double alpha) {
    const int p = static_cast<int>(X.cols());
    if (model.posterior.rows() != p)
        throw std::invalid_argument("semms_select: model/X predictor count mismatch");

    SemmsSelection sel;
    sel.posterior_null = model.posterior.col(1);
    for (int k = 0; k < p; ++k)
        if (sel.posterior_null(k) < threshold) sel.selected.push_back(k);

    const int n = static_cast<int>(X.rows());
    Eigen::MatrixXd design(n, sel.selected.size() + 1);
    design.col(0).setOnes();
    for (size_t j = 0; j < sel.selected.size(); ++j)
        design.col(static_cast<Eigen::Index>(j + 1)) = X.col(sel.selected[j]);
    sel.empty_selection = sel.selected.empty();
    sel.refit = ols_inference(design, y, alpha);
    return sel;
}

}  // namespace odeinf
