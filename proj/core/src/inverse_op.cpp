#include "dcplus/inverse_op.hpp"

namespace dcplus {

Eigen::PartialPivLU<Eigen::MatrixXd> factor_inner(const Eigen::MatrixXd& K, const char* what,
                                                  double rel_threshold) {
    Eigen::FullPivLU<Eigen::MatrixXd> probe(K);
    probe.setThreshold(rel_threshold);
    if (probe.rank() < K.rows())
        throw SingularMatrixError(std::string(what) + ": singular inner matrix (rank " +
                                  std::to_string(probe.rank()) + " of " +
                                  std::to_string(K.rows()) + ")");
    return Eigen::PartialPivLU<Eigen::MatrixXd>(K);
}

void require_nonsingular(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, double matrix_scale,
                         const char* what) {
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(matrix_scale > 0.0) || !(min_pivot > 1e-12 * matrix_scale))
        throw SingularMatrixError(std::string(what) +
                                  ": matrix is singular to working precision");
}

FactoredInverse::FactoredInverse(const Eigen::MatrixXd& M) : lu_(M) {
    if (M.rows() != M.cols()) throw SingularMatrixError("factor: matrix not square");
    require_nonsingular(lu_, M.cwiseAbs().maxCoeff(), "factor");
}

InverseOpPtr factor(const Eigen::MatrixXd& M) { return std::make_shared<FactoredInverse>(M); }

WoodburyInverse::WoodburyInverse(InverseOpPtr base, const Eigen::MatrixXd& S,
                                 const Eigen::MatrixXd& R)
    : base_(std::move(base)), R_(R) {
    Minv_S_ = base_->apply(S);
    MinvT_Rt_ = Eigen::MatrixXd(R.cols(), R.rows());
    for (Eigen::Index r = 0; r < R.rows(); ++r)
        MinvT_Rt_.col(r) = base_->apply_transpose(Eigen::VectorXd(R.row(r).transpose()));
    const Eigen::MatrixXd K =
        Eigen::MatrixXd::Identity(S.cols(), S.cols()) + R * Minv_S_;
    inner_ = factor_inner(K, "woodbury_update");
}

Eigen::VectorXd WoodburyInverse::apply(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = base_->apply(x);
    return y - Minv_S_ * inner_.solve(R_ * y);
}

Eigen::VectorXd WoodburyInverse::apply_transpose(const Eigen::VectorXd& x) const {
    // (M + SR)^{-T} x = M^{-T} x - M^{-T} R^T K^{-T} S^T M^{-T} x,
    // with S^T M^{-T} x = (M^{-1} S)^T x.
    const Eigen::VectorXd y = base_->apply_transpose(x);
    const Eigen::VectorXd z = inner_.transpose().solve(Minv_S_.transpose() * x);
    return y - MinvT_Rt_ * z;
}

LimitWoodburyInverse::LimitWoodburyInverse(InverseOpPtr base, const Eigen::MatrixXd& S,
                                           const Eigen::MatrixXd& R)
    : base_(std::move(base)), R_(R) {
    Minv_S_ = base_->apply(S);
    MinvT_Rt_ = Eigen::MatrixXd(R.cols(), R.rows());
    for (Eigen::Index r = 0; r < R.rows(); ++r)
        MinvT_Rt_.col(r) = base_->apply_transpose(Eigen::VectorXd(R.row(r).transpose()));
    inner_ = factor_inner(Eigen::MatrixXd(R * Minv_S_), "close_switch");
}

Eigen::VectorXd LimitWoodburyInverse::apply(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = base_->apply(x);
    return y - Minv_S_ * inner_.solve(R_ * y);
}

Eigen::VectorXd LimitWoodburyInverse::apply_transpose(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = base_->apply_transpose(x);
    const Eigen::VectorXd z = inner_.transpose().solve(Minv_S_.transpose() * x);
    return y - MinvT_Rt_ * z;
}

PaddedInverse::PaddedInverse(InverseOpPtr base, std::vector<int> src_of_ext)
    : base_(std::move(base)), src_(std::move(src_of_ext)) {
    for (int s : src_)
        if (s < 0 || s >= base_->dim())
            throw GridError("pad_for_split: source coordinate out of range");
}

Eigen::VectorXd PaddedInverse::apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd contracted = Eigen::VectorXd::Zero(base_->dim());
    for (size_t e = 0; e < src_.size(); ++e) contracted(src_[e]) += x(static_cast<int>(e));
    const Eigen::VectorXd y = base_->apply(contracted);
    Eigen::VectorXd out(src_.size());
    for (size_t e = 0; e < src_.size(); ++e) out(static_cast<int>(e)) = y(src_[e]);
    return out;
}

Eigen::VectorXd PaddedInverse::apply_transpose(const Eigen::VectorXd& x) const {
    Eigen::VectorXd contracted = Eigen::VectorXd::Zero(base_->dim());
    for (size_t e = 0; e < src_.size(); ++e) contracted(src_[e]) += x(static_cast<int>(e));
    const Eigen::VectorXd y = base_->apply_transpose(contracted);
    Eigen::VectorXd out(src_.size());
    for (size_t e = 0; e < src_.size(); ++e) out(static_cast<int>(e)) = y(src_[e]);
    return out;
}

RankCorrectedInverse::RankCorrectedInverse(InverseOpPtr base, const Eigen::MatrixXd& U,
                                           const Eigen::MatrixXd& V, const Eigen::MatrixXd& K)
    : base_(std::move(base)), U_(U), V_(V), K_(factor_inner(K, "open_split")) {}

Eigen::VectorXd RankCorrectedInverse::apply(const Eigen::VectorXd& x) const {
    return base_->apply(x) + U_ * K_.solve(V_.transpose() * x);
}

Eigen::VectorXd RankCorrectedInverse::apply_transpose(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = K_.transpose().solve(U_.transpose() * x);
    return base_->apply_transpose(x) + V_ * z;
}

}  // namespace dcplus
