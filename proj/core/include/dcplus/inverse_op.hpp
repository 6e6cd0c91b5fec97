#pragma once

#include <memory>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "dcplus/errors.hpp"

namespace dcplus {

/// Action of a matrix inverse. Concrete handles are a dense factorization or
/// a factorization plus a stack of low-rank corrections; they are immutable
/// after construction and safe to share across threads.
class InverseOp {
  public:
    virtual ~InverseOp() = default;
    virtual int dim() const = 0;
    /// M^{-1} x
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
    /// M^{-T} x
    virtual Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const = 0;
    /// Number of stacked corrections above the base factorization.
    virtual int depth() const { return 0; }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c) = apply(Eigen::VectorXd(x.col(c)));
        return out;
    }
};

using InverseOpPtr = std::shared_ptr<const InverseOp>;

/// Dense LU with partial pivoting. Throws SingularMatrixError when the
/// matrix is not factorizable to working precision.
class FactoredInverse final : public InverseOp {
  public:
    explicit FactoredInverse(const Eigen::MatrixXd& M);

    int dim() const override { return static_cast<int>(lu_.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override { return lu_.solve(x); }
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const override {
        return lu_.transpose().solve(x);
    }

  private:
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

InverseOpPtr factor(const Eigen::MatrixXd& M);

/// (M + S R)^{-1} given M^{-1}: the correction solves only the r x r system
/// (1 + R M^{-1} S). Throws SingularMatrixError when that inner matrix is
/// singular, which signals a topologically degenerate update.
class WoodburyInverse final : public InverseOp {
  public:
    WoodburyInverse(InverseOpPtr base, const Eigen::MatrixXd& S, const Eigen::MatrixXd& R);

    int dim() const override { return base_->dim(); }
    int depth() const override { return base_->depth() + 1; }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const override;

  private:
    InverseOpPtr base_;
    Eigen::MatrixXd R_;        // r x dim
    Eigen::MatrixXd Minv_S_;   // dim x r
    Eigen::MatrixXd MinvT_Rt_; // dim x r
    Eigen::PartialPivLU<Eigen::MatrixXd> inner_;  // 1 + R M^{-1} S
};

/// Ideal-switch closing: (M + c S R)^{-1} in the limit c -> infinity, where
/// the inner bracket loses its identity term and becomes [R M^{-1} S].
class LimitWoodburyInverse final : public InverseOp {
  public:
    LimitWoodburyInverse(InverseOpPtr base, const Eigen::MatrixXd& S, const Eigen::MatrixXd& R);

    int dim() const override { return base_->dim(); }
    int depth() const override { return base_->depth() + 1; }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const override;

  private:
    InverseOpPtr base_;
    Eigen::MatrixXd R_;
    Eigen::MatrixXd Minv_S_;
    Eigen::MatrixXd MinvT_Rt_;
    Eigen::PartialPivLU<Eigen::MatrixXd> inner_;  // R M^{-1} S
};

/// Copies rows/columns of a smaller inverse into an extended index space:
/// coordinate e of the padded operator reads coordinate src[e] of the base.
/// Input vectors are contracted by summing duplicated coordinates.
class PaddedInverse final : public InverseOp {
  public:
    PaddedInverse(InverseOpPtr base, std::vector<int> src_of_ext);

    int dim() const override { return static_cast<int>(src_.size()); }
    int depth() const override { return base_->depth(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const override;

  private:
    InverseOpPtr base_;
    std::vector<int> src_;
};

/// base + U K^{-1} V^T with a small dense K; the correction shape shared by
/// the bus-split update.
class RankCorrectedInverse final : public InverseOp {
  public:
    RankCorrectedInverse(InverseOpPtr base, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                         const Eigen::MatrixXd& K);

    int dim() const override { return base_->dim(); }
    int depth() const override { return base_->depth() + 1; }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const override;

  private:
    InverseOpPtr base_;
    Eigen::MatrixXd U_, V_;
    Eigen::PartialPivLU<Eigen::MatrixXd> K_;
};

/// Factors the small matrix K, throwing SingularMatrixError when it is rank
/// deficient at the given relative threshold.
Eigen::PartialPivLU<Eigen::MatrixXd> factor_inner(const Eigen::MatrixXd& K, const char* what,
                                                  double rel_threshold = 1e-10);

/// Pivot-based singularity check for a completed partial-pivoting LU;
/// Eigen's rcond estimate alone can miss exactly singular inputs.
void require_nonsingular(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, double matrix_scale,
                         const char* what);

}  // namespace dcplus
