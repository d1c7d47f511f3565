#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "stackgp/linalg.hpp"

namespace stackgp::kernels {

/// Input points, one per row. Row-major so each point is a contiguous span.
using Inputs = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using linalg::Matrix;
using linalg::Vector;

enum class ParamKind { Amplitude, Lengthscale, Period, Constant };

struct ParamInfo {
    std::string name;
    ParamKind kind;
    bool frozen = false;
};

/// Kernel expression over {SquaredExponential, Periodic, Constant} combined
/// with {Sum, Product}. Hyperparameters live as logarithms in one flat vector
/// ordered by first appearance in a pre-order walk. Several leaves may share a
/// parameter slot (tied hyperparameters).
class KernelSpec {
public:
    static KernelSpec squared_exponential(double amplitude, double lengthscale);
    static KernelSpec periodic(double amplitude, double lengthscale, double period);
    static KernelSpec constant(double value);
    static KernelSpec sum(const std::vector<KernelSpec>& terms);
    static KernelSpec product(const std::vector<KernelSpec>& factors);

    /// Periodic(amplitude, l_per, p) + SquaredExponential(se_amplitude, l_se),
    /// all four hyperparameters independent.
    static KernelSpec locally_periodic(double amplitude, double periodic_lengthscale, double period,
                                       double se_amplitude, double se_lengthscale);

    /// sigma^2 exp(-2 sin^2(pi|t-t'|/p) / l^2) + exp(-(t-t')^2 / (2 l^2)):
    /// one lengthscale shared by both terms and the SE amplitude pinned to 1.
    static KernelSpec tied_locally_periodic(double amplitude, double lengthscale, double period);

    std::size_t num_params() const noexcept { return log_params_.size(); }
    const std::vector<double>& log_params() const noexcept { return log_params_; }
    const std::vector<ParamInfo>& param_info() const noexcept { return info_; }

    KernelSpec with_log_params(std::span<const double> log_params) const;
    /// Freezes every parameter whose name ends with `suffix` (e.g. "period").
    KernelSpec with_frozen(const std::string& suffix, bool frozen = true) const;

    double eval(std::span<const double> a, std::span<const double> b) const;
    /// Returns k(a,b) and writes dk/dlog(theta) for every slot into `grad`.
    double eval_grad(std::span<const double> a, std::span<const double> b, std::span<double> grad) const;

    /// True when the expression is a single SquaredExponential leaf.
    bool is_plain_se() const noexcept;
    std::string describe() const;

    enum class NodeType { SquaredExponential, Periodic, Constant, Sum, Product };
    struct Node {
        NodeType type;
        std::vector<int> params;    // slots used by a leaf
        std::vector<int> children;  // node indices for combinators
    };
    const std::vector<Node>& nodes() const noexcept { return *nodes_; }

private:
    KernelSpec() = default;
    static KernelSpec combine(NodeType type, const std::vector<KernelSpec>& parts);

    double eval_node(int idx, std::span<const double> a, std::span<const double> b) const;
    void grad_node(int idx, std::span<const double> a, std::span<const double> b, double weight,
                   std::span<double> grad) const;
    std::string describe_node(int idx) const;

    std::shared_ptr<const std::vector<Node>> nodes_;
    std::vector<double> log_params_;
    std::vector<ParamInfo> info_;
};

/// One block of consecutive feature columns sharing a per-column kernel.
struct FeatureGroup {
    std::string name;
    std::size_t begin = 0;
    std::size_t count = 0;
    KernelSpec column_kernel;
};

/// Product kernel over feature groups:
///   k(a,b) = s^2 * prod_g prod_{c in g} k_g(a_c, b_c)
/// The leading signal variance s^2 is one free slot; column kernels built by
/// `se_groups` have their own amplitude frozen at 1.
class FeatureGroupKernel {
public:
    FeatureGroupKernel(std::vector<FeatureGroup> groups, double signal_variance = 1.0);

    /// Groups (name, column count) with SE column kernels of unit (frozen)
    /// amplitude and one lengthscale per group.
    static FeatureGroupKernel se_groups(const std::vector<std::pair<std::string, std::size_t>>& layout,
                                        double signal_variance = 1.0, double lengthscale = 1.0);

    std::size_t dim() const noexcept { return dim_; }
    const std::vector<FeatureGroup>& groups() const noexcept { return groups_; }
    std::size_t num_params() const noexcept { return log_params_.size(); }
    const std::vector<double>& log_params() const noexcept { return log_params_; }
    const std::vector<ParamInfo>& param_info() const noexcept { return info_; }

    FeatureGroupKernel with_log_params(std::span<const double> log_params) const;
    /// Index of the group's first parameter slot in the flat vector.
    std::size_t param_offset(std::size_t group) const { return offsets_.at(group); }

    double eval(std::span<const double> a, std::span<const double> b) const;
    double eval_grad(std::span<const double> a, std::span<const double> b, std::span<double> grad) const;

    /// Value of group g's column product alone (no signal variance).
    double eval_group(std::size_t g, std::span<const double> a, std::span<const double> b) const;

private:
    std::vector<FeatureGroup> groups_;
    std::vector<std::size_t> offsets_;
    std::size_t dim_ = 0;
    std::vector<double> log_params_;
    std::vector<ParamInfo> info_;
};

using AnyKernel = std::variant<KernelSpec, FeatureGroupKernel>;

/// Input dimension the kernel requires; 0 means any.
std::size_t input_dim(const AnyKernel& k);
std::size_t num_params(const AnyKernel& k);
const std::vector<double>& log_params(const AnyKernel& k);
const std::vector<ParamInfo>& param_info(const AnyKernel& k);
AnyKernel with_log_params(const AnyKernel& k, std::span<const double> log_params);

double eval(const AnyKernel& k, std::span<const double> a, std::span<const double> b);

/// Stacked-kernel evaluation that checks both points against the layout.
double eval_stacked(const FeatureGroupKernel& k, std::span<const double> a, std::span<const double> b);

/// G(i,j) = k(xs_i, ys_j).
Matrix gram(const AnyKernel& k, const Inputs& xs, const Inputs& ys);
/// Symmetric Gram of xs against itself.
linalg::SymMatrix gram(const AnyKernel& k, const Inputs& xs);
/// Diagonal k(x_i, x_i).
Vector gram_diagonal(const AnyKernel& k, const Inputs& xs);

/// One dK/dlog(theta_d) matrix per parameter slot, in flat order.
std::vector<Matrix> grad_hyper(const AnyKernel& k, const Inputs& xs);

/// sum_{i,j} weights(i,j) * dK(i,j)/dlog(theta_d) for every slot d, without
/// materializing the derivative matrices. `weights` must be symmetric.
Vector contract_grad(const AnyKernel& k, const Inputs& xs, const Matrix& weights);

}  // namespace stackgp::kernels
