#pragma once

// Shared conventions: column-per-sample design matrices, the hard-thresholding
// operator, residuals, leverage and the penalized normal-equation solve.

#include "robreg/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace robreg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexSet = std::vector<Index>; // always sorted ascending

/// Design matrix X (d x n, column i is sample x_i) and responses y (length n).
class Dataset {
public:
	Dataset() = default;

	Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
		if (x_.cols() < 1 || x_.rows() < 1)
			throw InvalidArgument("dataset needs n >= 1 samples and d >= 1 covariates");
		if (x_.cols() != y_.size())
			throw InvalidArgument("design has " + std::to_string(x_.cols()) + " columns but y has " +
			                      std::to_string(y_.size()) + " entries");
		if (!x_.allFinite() || !y_.allFinite())
			throw InvalidArgument("dataset contains non-finite values");
	}

	const Matrix &x() const { return x_; }
	const Vector &y() const { return y_; }
	Index n() const { return x_.cols(); }
	Index d() const { return x_.rows(); }

	Dataset with_responses(Vector y) const { return Dataset(x_, std::move(y)); }

private:
	Matrix x_;
	Vector y_;
};

/// Sparse vector over {0..n-1}: values are zero off the support.
struct SparseCorruption {
	Vector values;
	IndexSet support;

	Index size() const { return values.size(); }
	Index count() const { return static_cast<Index>(support.size()); }
};

inline IndexSet complement(const IndexSet &support, Index n) {
	IndexSet out;
	out.reserve(static_cast<std::size_t>(n) - support.size());
	auto it = support.begin();
	for (Index i = 0; i < n; ++i) {
		if (it != support.end() && *it == i)
			++it;
		else
			out.push_back(i);
	}
	return out;
}

inline IndexSet set_union(const IndexSet &a, const IndexSet &b) {
	IndexSet out;
	std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
	return out;
}

inline IndexSet set_intersection(const IndexSet &a, const IndexSet &b) {
	IndexSet out;
	std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
	return out;
}

/// Orders indices by decreasing |v|, ties broken by the smaller index.
inline auto magnitude_order(const Vector &v) {
	return [&v](Index a, Index b) {
		const double ma = std::abs(v[a]), mb = std::abs(v[b]);
		if (ma != mb)
			return ma > mb;
		return a < b;
	};
}

/// Keeps the k largest-magnitude entries of v (ties: smaller index first) and
/// zeroes the rest. Exact zeros never enter the support.
inline SparseCorruption hard_threshold(const Vector &v, Index k) {
	const Index n = v.size();
	if (k < 0 || k > n)
		throw InvalidArgument("hard_threshold: k=" + std::to_string(k) + " outside [0, " + std::to_string(n) + "]");

	SparseCorruption out{Vector::Zero(n), {}};
	if (k == 0)
		return out;

	std::vector<Index> order(static_cast<std::size_t>(n));
	std::iota(order.begin(), order.end(), Index{0});
	const auto cmp = magnitude_order(v);
	if (k < n)
		std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), cmp);
	// after nth_element the first k slots hold exactly the top-k under the strict order
	for (Index j = 0; j < k; ++j) {
		const Index i = order[static_cast<std::size_t>(j)];
		if (v[i] != 0.0)
			out.support.push_back(i);
	}
	std::sort(out.support.begin(), out.support.end());
	for (Index i : out.support)
		out.values[i] = v[i];
	return out;
}

/// r = y - X^T w
inline Vector residuals(const Dataset &data, const Vector &w) {
	if (w.size() != data.d())
		throw InvalidArgument("residuals: w has length " + std::to_string(w.size()) + ", expected " +
		                      std::to_string(data.d()));
	return data.y() - data.x().transpose() * w;
}

/// Cholesky factor of a symmetric positive-definite system with a condition guard.
class SpdFactor {
public:
	explicit SpdFactor(const Matrix &a, const char *what = "system matrix") {
		if (a.rows() != a.cols())
			throw InvalidArgument(std::string(what) + " is not square");
		llt_.compute(a);
		const double rcond = llt_.info() == Eigen::Success ? llt_.rcond() : 0.0;
		if (!(rcond > 10.0 * std::numeric_limits<double>::epsilon())) {
			const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
			throw SingularMatrix(std::string(what) + " is singular or not positive definite", cond);
		}
		rcond_ = rcond;
	}

	template <typename Rhs>
	auto solve(const Eigen::MatrixBase<Rhs> &b) const {
		return llt_.solve(b);
	}

	Matrix inverse() const { return llt_.solve(Matrix::Identity(llt_.rows(), llt_.cols())); }
	const Eigen::LLT<Matrix> &llt() const { return llt_; }
	double condition_estimate() const { return 1.0 / rcond_; }

	double log_determinant() const {
		return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
	}

private:
	Eigen::LLT<Matrix> llt_;
	double rcond_ = 0.0;
};

/// h_i = x_i^T (XX^T)^{-1} x_i
inline Vector leverage_scores(const Dataset &data) {
	const Matrix &x = data.x();
	const SpdFactor gram(x * x.transpose(), "XX^T");
	const Matrix half = gram.llt().matrixL().solve(x);
	return half.colwise().squaredNorm().transpose();
}

/// (XX^T + M)^{-1} (Xy + M w0) through a Cholesky solve.
inline Vector penalized_least_squares(const Dataset &data, const Matrix &m, const Vector &w0) {
	const Index d = data.d();
	if (m.rows() != d || m.cols() != d || w0.size() != d)
		throw InvalidArgument("penalized_least_squares: penalty or prior mean has wrong dimension");
	const Matrix &x = data.x();
	const SpdFactor system(x * x.transpose() + m, "XX^T + M");
	return system.solve(x * data.y() + m * w0);
}

inline Vector ordinary_least_squares(const Dataset &data) {
	const Matrix &x = data.x();
	const SpdFactor gram(x * x.transpose(), "XX^T");
	return gram.solve(x * data.y());
}

inline Vector gather(const Vector &v, const IndexSet &idx) {
	Vector out(static_cast<Index>(idx.size()));
	for (std::size_t j = 0; j < idx.size(); ++j)
		out[static_cast<Index>(j)] = v[idx[j]];
	return out;
}

inline Matrix gather_columns(const Matrix &x, const IndexSet &idx) {
	Matrix out(x.rows(), static_cast<Index>(idx.size()));
	for (std::size_t j = 0; j < idx.size(); ++j)
		out.col(static_cast<Index>(j)) = x.col(idx[j]);
	return out;
}

} // namespace robreg
