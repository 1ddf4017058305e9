// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>
#include <posloss/gbrt.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace posloss
{
struct SvrModel
{
    std::vector<FeatureVector> support_vectors;  // standardized coordinates
    std::vector<double> dual_coefficients;       // alpha - alpha*
    std::vector<double> multiplicity;            // training rows merged into each vector
    double bias = 0.0;
    double kernel_gamma = 1.0 / 6.0;
    FeatureVector feature_means{};
    FeatureVector feature_scales{1, 1, 1, 1, 1, 1};
    double c = 1.0;
    double epsilon = 0.1;
    bool converged = true;
    std::uint64_t iterations = 0;

    FeatureVector standardize(const FeatureVector& v) const noexcept
    {
        FeatureVector s;
        for (std::size_t i = 0; i < 6; ++i)
            s[i] = (v[i] - feature_means[i]) / feature_scales[i];
        return s;
    }

    double kernel(const FeatureVector& a, const FeatureVector& b) const noexcept
    {
        double d2 = 0.0;
        for (std::size_t i = 0; i < 6; ++i)
            d2 += (a[i] - b[i]) * (a[i] - b[i]);
        return std::exp(-kernel_gamma * d2);
    }

    double predict(const FeatureVector& v) const noexcept
    {
        const auto s = standardize(v);
        double sum = bias;
        for (std::size_t i = 0; i < support_vectors.size(); ++i)
            sum += dual_coefficients[i] * kernel(support_vectors[i], s);
        return sum;
    }
};

struct SvrParams
{
    double c = 1.0;
    double epsilon = 0.1;
    std::string gamma_mode = "scale";  // "scale" or a positive number as text
    std::uint64_t max_iterations = 0;  // 0 = 10 * N^2 over the merged training rows
    double tolerance = 1e-3;
    std::uint64_t seed = 0;  // the solver is deterministic; kept for a uniform training interface
};

namespace detail
{
/// Epsilon-SVR dual in the 2l-variable form
///   min 1/2 b^T Q b + p^T b,  y^T b = 0,  0 <= b_t <= C_t
/// with b = [alpha; alpha*], y = [+1; -1], p = [eps - z; eps + z],
/// Q_st = y_s y_t K(s mod l, t mod l). Solved by SMO with second-order
/// working-set selection (Fan, Chen & Lin 2005).
class SvrSolver
{
public:
    SvrSolver(std::vector<FeatureVector> x, std::span<const double> z, std::span<const double> upper,
        double gamma, double eps)
      : x_(std::move(x)), l_(x_.size()), gamma_(gamma)
    {
        const auto n2 = 2 * l_;
        y_.resize(n2);
        p_.resize(n2);
        c_.resize(n2);
        for (std::size_t i = 0; i < l_; ++i)
        {
            y_[i] = 1;
            y_[i + l_] = -1;
            p_[i] = eps - z[i];
            p_[i + l_] = eps + z[i];
            c_[i] = c_[i + l_] = upper[i];
        }
        beta_.assign(n2, 0.0);
        grad_ = p_;
        if (l_ <= full_kernel_limit)
        {
            kernel_.resize(l_ * l_);
            for (std::size_t i = 0; i < l_; ++i)
                for (std::size_t j = i; j < l_; ++j)
                    kernel_[i * l_ + j] = kernel_[j * l_ + i] = k(i, j);
        }
    }

    static constexpr std::size_t full_kernel_limit = 4096;

    /// Returns true on convergence to `tol` within `max_iter`.
    bool solve(double tol, std::uint64_t max_iter)
    {
        const auto n2 = 2 * l_;
        std::vector<double> row_i(l_), row_j(l_);
        for (iterations_ = 0; iterations_ < max_iter; ++iterations_)
        {
            // i: maximal violator of -y grad over I_up
            int i = -1;
            double gmax = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < n2; ++t)
                if (in_up(t) && (i < 0 || -y_[t] * grad_[t] > gmax))
                {
                    gmax = -y_[t] * grad_[t];
                    i = static_cast<int>(t);
                }
            if (i < 0)
                return true;
            kernel_row(static_cast<std::size_t>(i) % l_, row_i);

            int j = -1;
            double gmin = std::numeric_limits<double>::infinity();
            double best_obj = std::numeric_limits<double>::infinity();
            const auto ui = static_cast<std::size_t>(i);
            for (std::size_t t = 0; t < n2; ++t)
            {
                if (!in_low(t))
                    continue;
                const double v = -y_[t] * grad_[t];
                gmin = std::min(gmin, v);
                const double diff = gmax - v;
                if (diff > 0)
                {
                    // K_ii = K_tt = 1 for the RBF kernel
                    double a = 2.0 - 2.0 * row_i[t % l_];
                    if (a <= 0)
                        a = tau;
                    const double obj = -(diff * diff) / a;
                    if (obj < best_obj)
                    {
                        best_obj = obj;
                        j = static_cast<int>(t);
                    }
                }
            }
            gap_ = gmax - gmin;
            if (gap_ < tol || j < 0)
                return true;

            const auto uj = static_cast<std::size_t>(j);
            kernel_row(uj % l_, row_j);
            update_pair(ui, uj, row_i, row_j);
        }
        return false;
    }

    double bias() const
    {
        // rho from free variables, else midpoint of the feasible interval
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        std::size_t n_free = 0;
        for (std::size_t t = 0; t < 2 * l_; ++t)
        {
            const double yg = y_[t] * grad_[t];
            if (beta_[t] >= c_[t])
            {
                if (y_[t] == -1)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            }
            else if (beta_[t] <= 0.0)
            {
                if (y_[t] == +1)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            }
            else
            {
                ++n_free;
                sum_free += yg;
            }
        }
        const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
        return -rho;
    }

    std::vector<double> coefficients() const
    {
        std::vector<double> a(l_);
        for (std::size_t i = 0; i < l_; ++i)
            a[i] = beta_[i] - beta_[i + l_];
        return a;
    }

    std::uint64_t iterations() const noexcept { return iterations_; }

private:
    static constexpr double tau = 1e-12;

    bool in_up(std::size_t t) const noexcept
    {
        return (y_[t] == 1 && beta_[t] < c_[t]) || (y_[t] == -1 && beta_[t] > 0.0);
    }
    bool in_low(std::size_t t) const noexcept
    {
        return (y_[t] == 1 && beta_[t] > 0.0) || (y_[t] == -1 && beta_[t] < c_[t]);
    }

    double k(std::size_t a, std::size_t b) const noexcept
    {
        double d2 = 0.0;
        for (std::size_t f = 0; f < 6; ++f)
            d2 += (x_[a][f] - x_[b][f]) * (x_[a][f] - x_[b][f]);
        return std::exp(-gamma_ * d2);
    }

    void kernel_row(std::size_t a, std::vector<double>& row) const
    {
        if (!kernel_.empty())
            std::copy_n(kernel_.begin() + static_cast<std::ptrdiff_t>(a * l_), l_, row.begin());
        else
            for (std::size_t b = 0; b < l_; ++b)
                row[b] = k(a, b);
    }

    double q(std::size_t s, std::size_t t, const std::vector<double>& row_s) const noexcept
    {
        return y_[s] * y_[t] * row_s[t % l_];
    }

    void update_pair(std::size_t i, std::size_t j, const std::vector<double>& row_i, const std::vector<double>& row_j)
    {
        const double qii = 1.0, qjj = 1.0;
        const double qij = q(i, j, row_i);
        const double old_i = beta_[i], old_j = beta_[j];
        const double ci = c_[i], cj = c_[j];

        if (y_[i] != y_[j])
        {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0)
                quad = tau;
            const double delta = (-grad_[i] - grad_[j]) / quad;
            const double diff = beta_[i] - beta_[j];
            beta_[i] += delta;
            beta_[j] += delta;
            if (diff > 0)
            {
                if (beta_[j] < 0)
                {
                    beta_[j] = 0;
                    beta_[i] = diff;
                }
            }
            else if (beta_[i] < 0)
            {
                beta_[i] = 0;
                beta_[j] = -diff;
            }
            if (diff > ci - cj)
            {
                if (beta_[i] > ci)
                {
                    beta_[i] = ci;
                    beta_[j] = ci - diff;
                }
            }
            else if (beta_[j] > cj)
            {
                beta_[j] = cj;
                beta_[i] = cj + diff;
            }
        }
        else
        {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0)
                quad = tau;
            const double delta = (grad_[i] - grad_[j]) / quad;
            const double sum = beta_[i] + beta_[j];
            beta_[i] -= delta;
            beta_[j] += delta;
            if (sum > ci)
            {
                if (beta_[i] > ci)
                {
                    beta_[i] = ci;
                    beta_[j] = sum - ci;
                }
            }
            else if (beta_[j] < 0)
            {
                beta_[j] = 0;
                beta_[i] = sum;
            }
            if (sum > cj)
            {
                if (beta_[j] > cj)
                {
                    beta_[j] = cj;
                    beta_[i] = sum - cj;
                }
            }
            else if (beta_[i] < 0)
            {
                beta_[i] = 0;
                beta_[j] = sum;
            }
        }

        const double di = beta_[i] - old_i;
        const double dj = beta_[j] - old_j;
        for (std::size_t t = 0; t < 2 * l_; ++t)
            grad_[t] += q(i, t, row_i) * di + q(j, t, row_j) * dj;
    }

    std::vector<FeatureVector> x_;
    std::size_t l_;
    double gamma_;
    std::vector<int> y_;
    std::vector<double> p_, c_, beta_, grad_, kernel_;
    std::uint64_t iterations_ = 0;
    double gap_ = 0.0;
};

}  // namespace detail

/// Epsilon-SVR with an RBF kernel on standardized features.
///
/// Rows with identical features and target are merged into one point whose box
/// bound is C times its multiplicity; this is the same dual optimum with fewer variables.
inline SvrModel train_svr(std::span<const TrainingRow> train, const SvrParams& params = {})
{
    if (train.empty())
        throw ValidationError("train_svr: empty training set");
    if (!(params.c > 0.0))
        throw ValidationError("train_svr: C must be > 0");
    if (!(params.epsilon >= 0.0))
        throw ValidationError("train_svr: epsilon must be >= 0");

    SvrModel m;
    m.c = params.c;
    m.epsilon = params.epsilon;
    const auto n = static_cast<double>(train.size());
    for (std::size_t f = 0; f < 6; ++f)
    {
        double mean = 0.0;
        for (const auto& r : train)
            mean += r.first[f];
        mean /= n;
        double var = 0.0;
        for (const auto& r : train)
            var += (r.first[f] - mean) * (r.first[f] - mean);
        var /= n;
        m.feature_means[f] = mean;
        m.feature_scales[f] = var > 0.0 ? std::sqrt(var) : 1.0;
    }

    if (params.gamma_mode == "scale")
    {
        // 1 / (n_features * variance of all standardized entries); 1/6 when no feature is constant
        double mean = 0.0, sq = 0.0;
        for (const auto& r : train)
            for (double v : m.standardize(r.first))
            {
                mean += v;
                sq += v * v;
            }
        const double count = 6.0 * n;
        mean /= count;
        const double var = sq / count - mean * mean;
        m.kernel_gamma = var > 0.0 ? 1.0 / (6.0 * var) : 1.0;
    }
    else
    {
        try
        {
            m.kernel_gamma = std::stod(params.gamma_mode);
        }
        catch (const std::exception&)
        {
            throw ValidationError("train_svr: gamma_mode must be 'scale' or a number");
        }
        if (!(m.kernel_gamma > 0.0))
            throw ValidationError("train_svr: gamma must be > 0");
    }

    std::map<std::pair<FeatureVector, double>, std::size_t> merged;
    std::vector<FeatureVector> x;
    std::vector<double> z, upper, count;
    for (const auto& r : train)
    {
        auto [it, inserted] = merged.emplace(r, x.size());
        if (inserted)
        {
            x.push_back(m.standardize(r.first));
            z.push_back(r.second);
            count.push_back(1.0);
        }
        else
            count[it->second] += 1.0;
    }
    upper.resize(count.size());
    for (std::size_t i = 0; i < count.size(); ++i)
        upper[i] = params.c * count[i];

    const auto l = static_cast<std::uint64_t>(x.size());
    const auto max_iter = params.max_iterations ? params.max_iterations : 10 * l * l;
    detail::SvrSolver solver(x, z, upper, m.kernel_gamma, params.epsilon);
    m.converged = solver.solve(params.tolerance, std::max<std::uint64_t>(max_iter, 1));
    m.iterations = solver.iterations();
    m.bias = solver.bias();

    const auto coef = solver.coefficients();
    for (std::size_t i = 0; i < coef.size(); ++i)
        if (coef[i] != 0.0)
        {
            m.support_vectors.push_back(x[i]);
            m.dual_coefficients.push_back(coef[i]);
            m.multiplicity.push_back(count[i]);
        }
    return m;
}

}  // namespace posloss
