#include "stackgp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "stackgp/errors.hpp"

namespace stackgp::kernels {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        r2 += d * d;
    }
    return r2;
}

void check_same_dim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        std::ostringstream os;
        os << "kernel inputs have dimensions " << a.size() << " and " << b.size();
        throw DimensionMismatch(os.str());
    }
}

void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(what) + " must be strictly positive and finite");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// KernelSpec construction

KernelSpec KernelSpec::squared_exponential(double amplitude, double lengthscale) {
    check_positive(amplitude, "SE amplitude");
    check_positive(lengthscale, "SE lengthscale");
    KernelSpec k;
    k.nodes_ = std::make_shared<const std::vector<Node>>(
        std::vector<Node>{{NodeType::SquaredExponential, {0, 1}, {}}});
    k.log_params_ = {std::log(amplitude), std::log(lengthscale)};
    k.info_ = {{"se.amplitude", ParamKind::Amplitude}, {"se.lengthscale", ParamKind::Lengthscale}};
    return k;
}

KernelSpec KernelSpec::periodic(double amplitude, double lengthscale, double period) {
    check_positive(amplitude, "periodic amplitude");
    check_positive(lengthscale, "periodic lengthscale");
    check_positive(period, "periodic period");
    KernelSpec k;
    k.nodes_ = std::make_shared<const std::vector<Node>>(
        std::vector<Node>{{NodeType::Periodic, {0, 1, 2}, {}}});
    k.log_params_ = {std::log(amplitude), std::log(lengthscale), std::log(period)};
    k.info_ = {{"periodic.amplitude", ParamKind::Amplitude},
               {"periodic.lengthscale", ParamKind::Lengthscale},
               {"periodic.period", ParamKind::Period}};
    return k;
}

KernelSpec KernelSpec::constant(double value) {
    check_positive(value, "constant kernel value");
    KernelSpec k;
    k.nodes_ = std::make_shared<const std::vector<Node>>(std::vector<Node>{{NodeType::Constant, {0}, {}}});
    k.log_params_ = {std::log(value)};
    k.info_ = {{"constant.value", ParamKind::Constant}};
    return k;
}

KernelSpec KernelSpec::combine(NodeType type, const std::vector<KernelSpec>& parts) {
    if (parts.empty()) throw ConfigError("sum/product kernel needs at least one term");
    const char* label = type == NodeType::Sum ? "sum" : "product";
    std::vector<Node> nodes;
    nodes.push_back({type, {}, {}});
    KernelSpec out;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& part = parts[p];
        const int node_offset = static_cast<int>(nodes.size());
        const int param_offset = static_cast<int>(out.log_params_.size());
        nodes.front().children.push_back(node_offset);
        for (const auto& n : part.nodes()) {
            Node copy = n;
            for (int& c : copy.children) c += node_offset;
            for (int& q : copy.params) q += param_offset;
            nodes.push_back(std::move(copy));
        }
        for (std::size_t q = 0; q < part.num_params(); ++q) {
            out.log_params_.push_back(part.log_params_[q]);
            ParamInfo info = part.info_[q];
            info.name = std::string(label) + "[" + std::to_string(p) + "]." + info.name;
            out.info_.push_back(std::move(info));
        }
    }
    out.nodes_ = std::make_shared<const std::vector<Node>>(std::move(nodes));
    return out;
}

KernelSpec KernelSpec::sum(const std::vector<KernelSpec>& terms) { return combine(NodeType::Sum, terms); }

KernelSpec KernelSpec::product(const std::vector<KernelSpec>& factors) {
    return combine(NodeType::Product, factors);
}

KernelSpec KernelSpec::locally_periodic(double amplitude, double periodic_lengthscale, double period,
                                        double se_amplitude, double se_lengthscale) {
    return sum({periodic(amplitude, periodic_lengthscale, period),
                squared_exponential(se_amplitude, se_lengthscale)});
}

KernelSpec KernelSpec::tied_locally_periodic(double amplitude, double lengthscale, double period) {
    check_positive(amplitude, "periodic amplitude");
    check_positive(lengthscale, "lengthscale");
    check_positive(period, "period");
    KernelSpec k;
    k.nodes_ = std::make_shared<const std::vector<Node>>(std::vector<Node>{
        {NodeType::Sum, {}, {1, 2}},
        {NodeType::Periodic, {0, 1, 2}, {}},
        {NodeType::SquaredExponential, {3, 1}, {}},
    });
    k.log_params_ = {std::log(amplitude), std::log(lengthscale), std::log(period), 0.0};
    k.info_ = {{"periodic.amplitude", ParamKind::Amplitude},
               {"lengthscale", ParamKind::Lengthscale},
               {"periodic.period", ParamKind::Period},
               {"se.amplitude", ParamKind::Amplitude, true}};
    return k;
}

KernelSpec KernelSpec::with_log_params(std::span<const double> log_params) const {
    if (log_params.size() != log_params_.size()) {
        throw DimensionMismatch("kernel expects " + std::to_string(log_params_.size()) + " parameters, got " +
                                std::to_string(log_params.size()));
    }
    KernelSpec k = *this;
    k.log_params_.assign(log_params.begin(), log_params.end());
    return k;
}

KernelSpec KernelSpec::with_frozen(const std::string& suffix, bool frozen) const {
    KernelSpec k = *this;
    for (auto& info : k.info_) {
        if (info.name.size() >= suffix.size() &&
            info.name.compare(info.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            info.frozen = frozen;
        }
    }
    return k;
}

bool KernelSpec::is_plain_se() const noexcept {
    return nodes_->size() == 1 && nodes_->front().type == NodeType::SquaredExponential;
}

// ---------------------------------------------------------------------------
// KernelSpec evaluation

double KernelSpec::eval(std::span<const double> a, std::span<const double> b) const {
    check_same_dim(a, b);
    return eval_node(0, a, b);
}

double KernelSpec::eval_grad(std::span<const double> a, std::span<const double> b, std::span<double> grad) const {
    check_same_dim(a, b);
    if (grad.size() != log_params_.size()) throw DimensionMismatch("gradient buffer has wrong size");
    std::fill(grad.begin(), grad.end(), 0.0);
    grad_node(0, a, b, 1.0, grad);
    return eval_node(0, a, b);
}

double KernelSpec::eval_node(int idx, std::span<const double> a, std::span<const double> b) const {
    const Node& n = (*nodes_)[static_cast<std::size_t>(idx)];
    switch (n.type) {
        case NodeType::SquaredExponential: {
            const double amp = std::exp(log_params_[n.params[0]]);
            const double l2 = std::exp(2.0 * log_params_[n.params[1]]);
            return amp * std::exp(-0.5 * squared_distance(a, b) / l2);
        }
        case NodeType::Periodic: {
            const double amp = std::exp(log_params_[n.params[0]]);
            const double l2 = std::exp(2.0 * log_params_[n.params[1]]);
            const double period = std::exp(log_params_[n.params[2]]);
            const double s = std::sin(std::numbers::pi * std::sqrt(squared_distance(a, b)) / period);
            return amp * std::exp(-2.0 * s * s / l2);
        }
        case NodeType::Constant:
            return std::exp(log_params_[n.params[0]]);
        case NodeType::Sum: {
            double v = 0.0;
            for (int c : n.children) v += eval_node(c, a, b);
            return v;
        }
        case NodeType::Product: {
            double v = 1.0;
            for (int c : n.children) v *= eval_node(c, a, b);
            return v;
        }
    }
    return 0.0;
}

void KernelSpec::grad_node(int idx, std::span<const double> a, std::span<const double> b, double weight,
                           std::span<double> grad) const {
    const Node& n = (*nodes_)[static_cast<std::size_t>(idx)];
    switch (n.type) {
        case NodeType::SquaredExponential: {
            const double l2 = std::exp(2.0 * log_params_[n.params[1]]);
            const double r2 = squared_distance(a, b);
            const double v = std::exp(log_params_[n.params[0]]) * std::exp(-0.5 * r2 / l2);
            grad[n.params[0]] += weight * v;
            grad[n.params[1]] += weight * v * r2 / l2;
            return;
        }
        case NodeType::Periodic: {
            const double l2 = std::exp(2.0 * log_params_[n.params[1]]);
            const double period = std::exp(log_params_[n.params[2]]);
            const double u = std::numbers::pi * std::sqrt(squared_distance(a, b)) / period;
            const double s = std::sin(u);
            const double v = std::exp(log_params_[n.params[0]]) * std::exp(-2.0 * s * s / l2);
            grad[n.params[0]] += weight * v;
            grad[n.params[1]] += weight * v * 4.0 * s * s / l2;
            grad[n.params[2]] += weight * v * 2.0 * u * std::sin(2.0 * u) / l2;
            return;
        }
        case NodeType::Constant:
            grad[n.params[0]] += weight * std::exp(log_params_[n.params[0]]);
            return;
        case NodeType::Sum:
            for (int c : n.children) grad_node(c, a, b, weight, grad);
            return;
        case NodeType::Product: {
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                double others = weight;
                for (std::size_t j = 0; j < n.children.size(); ++j) {
                    if (j != i) others *= eval_node(n.children[j], a, b);
                }
                grad_node(n.children[i], a, b, others, grad);
            }
            return;
        }
    }
}

std::string KernelSpec::describe() const { return describe_node(0); }

std::string KernelSpec::describe_node(int idx) const {
    const Node& n = (*nodes_)[static_cast<std::size_t>(idx)];
    std::ostringstream os;
    auto p = [&](int slot) { return std::exp(log_params_[slot]); };
    switch (n.type) {
        case NodeType::SquaredExponential:
            os << "SE(amp=" << p(n.params[0]) << ", l=" << p(n.params[1]) << ")";
            break;
        case NodeType::Periodic:
            os << "Periodic(amp=" << p(n.params[0]) << ", l=" << p(n.params[1]) << ", p=" << p(n.params[2]) << ")";
            break;
        case NodeType::Constant:
            os << "Const(" << p(n.params[0]) << ")";
            break;
        case NodeType::Sum:
        case NodeType::Product: {
            const char* op = n.type == NodeType::Sum ? " + " : " * ";
            os << "(";
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) os << op;
                os << describe_node(n.children[i]);
            }
            os << ")";
            break;
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// FeatureGroupKernel

FeatureGroupKernel::FeatureGroupKernel(std::vector<FeatureGroup> groups, double signal_variance)
    : groups_(std::move(groups)) {
    if (groups_.empty()) throw LayoutMismatch("feature kernel needs at least one group");
    check_positive(signal_variance, "signal variance");

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& g : groups_) {
        if (g.count == 0) throw LayoutMismatch("group '" + g.name + "' has no columns");
        ranges.emplace_back(g.begin, g.count);
    }
    std::sort(ranges.begin(), ranges.end());
    std::size_t next = 0;
    for (const auto& [begin, count] : ranges) {
        if (begin != next) throw LayoutMismatch("group column ranges overlap or leave gaps");
        next = begin + count;
    }
    dim_ = next;

    log_params_.push_back(std::log(signal_variance));
    info_.push_back({"signal_variance", ParamKind::Amplitude});
    for (const auto& g : groups_) {
        offsets_.push_back(log_params_.size());
        const auto& lp = g.column_kernel.log_params();
        const auto& info = g.column_kernel.param_info();
        for (std::size_t q = 0; q < lp.size(); ++q) {
            log_params_.push_back(lp[q]);
            ParamInfo named = info[q];
            named.name = g.name + "." + named.name;
            info_.push_back(std::move(named));
        }
    }
}

FeatureGroupKernel FeatureGroupKernel::se_groups(const std::vector<std::pair<std::string, std::size_t>>& layout,
                                                 double signal_variance, double lengthscale) {
    std::vector<FeatureGroup> groups;
    std::size_t begin = 0;
    for (const auto& [name, count] : layout) {
        groups.push_back({name, begin, count,
                          KernelSpec::squared_exponential(1.0, lengthscale).with_frozen("amplitude")});
        begin += count;
    }
    return FeatureGroupKernel(std::move(groups), signal_variance);
}

FeatureGroupKernel FeatureGroupKernel::with_log_params(std::span<const double> log_params) const {
    if (log_params.size() != log_params_.size()) {
        throw DimensionMismatch("feature kernel expects " + std::to_string(log_params_.size()) + " parameters");
    }
    FeatureGroupKernel k = *this;
    k.log_params_.assign(log_params.begin(), log_params.end());
    for (std::size_t g = 0; g < k.groups_.size(); ++g) {
        auto& spec = k.groups_[g].column_kernel;
        spec = spec.with_log_params(log_params.subspan(offsets_[g], spec.num_params()));
    }
    return k;
}

double FeatureGroupKernel::eval_group(std::size_t g, std::span<const double> a, std::span<const double> b) const {
    const auto& grp = groups_[g];
    const auto& spec = grp.column_kernel;
    if (spec.is_plain_se()) {
        const auto& lp = spec.log_params();
        double r2 = 0.0;
        for (std::size_t c = grp.begin; c < grp.begin + grp.count; ++c) {
            const double d = a[c] - b[c];
            r2 += d * d;
        }
        return std::exp(static_cast<double>(grp.count) * lp[0] - 0.5 * r2 * std::exp(-2.0 * lp[1]));
    }
    double v = 1.0;
    for (std::size_t c = grp.begin; c < grp.begin + grp.count; ++c) {
        v *= spec.eval(a.subspan(c, 1), b.subspan(c, 1));
    }
    return v;
}

double FeatureGroupKernel::eval(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != dim_ || b.size() != dim_) {
        throw LayoutMismatch("feature vector length " + std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                             " does not match kernel layout of " + std::to_string(dim_) + " columns");
    }
    double v = std::exp(log_params_[0]);
    for (std::size_t g = 0; g < groups_.size(); ++g) v *= eval_group(g, a, b);
    return v;
}

double FeatureGroupKernel::eval_grad(std::span<const double> a, std::span<const double> b,
                                     std::span<double> grad) const {
    if (a.size() != dim_ || b.size() != dim_) throw LayoutMismatch("feature vector does not match kernel layout");
    if (grad.size() != log_params_.size()) throw DimensionMismatch("gradient buffer has wrong size");
    std::fill(grad.begin(), grad.end(), 0.0);

    // Per-group values and d(group value)/d(group params), then the product rule
    // across groups. Column products inside a group use prefix/suffix products.
    thread_local std::vector<double> group_values;
    thread_local std::vector<double> col_values, suffix, col_grad;
    group_values.assign(groups_.size(), 0.0);
    for (std::size_t g = 0; g < groups_.size(); ++g) group_values[g] = eval_group(g, a, b);

    const double signal = std::exp(log_params_[0]);
    double total = signal;
    for (double gv : group_values) total *= gv;
    grad[0] = total;

    for (std::size_t g = 0; g < groups_.size(); ++g) {
        double others = signal;
        for (std::size_t h = 0; h < groups_.size(); ++h) {
            if (h != g) others *= group_values[h];
        }
        const auto& grp = groups_[g];
        const auto& spec = grp.column_kernel;
        const std::size_t off = offsets_[g];
        if (spec.is_plain_se()) {
            const auto& lp = spec.log_params();
            double r2 = 0.0;
            for (std::size_t c = grp.begin; c < grp.begin + grp.count; ++c) {
                const double d = a[c] - b[c];
                r2 += d * d;
            }
            const double gv = group_values[g];
            grad[off] += others * static_cast<double>(grp.count) * gv;
            grad[off + 1] += others * gv * r2 * std::exp(-2.0 * lp[1]);
            continue;
        }
        const std::size_t np = spec.num_params();
        col_values.assign(grp.count, 0.0);
        suffix.assign(grp.count + 1, 1.0);
        col_grad.assign(np, 0.0);
        for (std::size_t c = 0; c < grp.count; ++c) {
            col_values[c] = spec.eval(a.subspan(grp.begin + c, 1), b.subspan(grp.begin + c, 1));
        }
        for (std::size_t c = grp.count; c-- > 0;) suffix[c] = suffix[c + 1] * col_values[c];
        double prefix = 1.0;
        for (std::size_t c = 0; c < grp.count; ++c) {
            spec.eval_grad(a.subspan(grp.begin + c, 1), b.subspan(grp.begin + c, 1), col_grad);
            const double w = others * prefix * suffix[c + 1];
            for (std::size_t q = 0; q < np; ++q) grad[off + q] += w * col_grad[q];
            prefix *= col_values[c];
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Variant helpers and matrix builders

std::size_t input_dim(const AnyKernel& k) {
    if (const auto* f = std::get_if<FeatureGroupKernel>(&k)) return f->dim();
    return 0;
}

std::size_t num_params(const AnyKernel& k) {
    return std::visit([](const auto& kk) { return kk.num_params(); }, k);
}

const std::vector<double>& log_params(const AnyKernel& k) {
    return std::visit([](const auto& kk) -> const std::vector<double>& { return kk.log_params(); }, k);
}

const std::vector<ParamInfo>& param_info(const AnyKernel& k) {
    return std::visit([](const auto& kk) -> const std::vector<ParamInfo>& { return kk.param_info(); }, k);
}

AnyKernel with_log_params(const AnyKernel& k, std::span<const double> lp) {
    return std::visit([&](const auto& kk) -> AnyKernel { return kk.with_log_params(lp); }, k);
}

double eval(const AnyKernel& k, std::span<const double> a, std::span<const double> b) {
    return std::visit([&](const auto& kk) { return kk.eval(a, b); }, k);
}

double eval_stacked(const FeatureGroupKernel& k, std::span<const double> a, std::span<const double> b) {
    return k.eval(a, b);
}

namespace {

std::span<const double> row(const Inputs& x, Eigen::Index i) {
    return {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())};
}

void check_inputs(const AnyKernel& k, const Inputs& x) {
    const std::size_t d = input_dim(k);
    if (d != 0 && static_cast<std::size_t>(x.cols()) != d) {
        throw LayoutMismatch("inputs have " + std::to_string(x.cols()) + " columns, kernel layout expects " +
                             std::to_string(d));
    }
}

}  // namespace

Matrix gram(const AnyKernel& k, const Inputs& xs, const Inputs& ys) {
    if (xs.cols() != ys.cols()) throw DimensionMismatch("gram: input sets have different dimensions");
    check_inputs(k, xs);
    return std::visit(
        [&](const auto& kk) {
            Matrix g(xs.rows(), ys.rows());
            for (Eigen::Index j = 0; j < ys.rows(); ++j) {
                for (Eigen::Index i = 0; i < xs.rows(); ++i) g(i, j) = kk.eval(row(xs, i), row(ys, j));
            }
            return g;
        },
        k);
}

linalg::SymMatrix gram(const AnyKernel& k, const Inputs& xs) {
    check_inputs(k, xs);
    return std::visit(
        [&](const auto& kk) {
            Matrix g(xs.rows(), xs.rows());
            for (Eigen::Index j = 0; j < xs.rows(); ++j) {
                for (Eigen::Index i = j; i < xs.rows(); ++i) g(i, j) = kk.eval(row(xs, i), row(xs, j));
            }
            return linalg::SymMatrix::from_lower(std::move(g));
        },
        k);
}

Vector gram_diagonal(const AnyKernel& k, const Inputs& xs) {
    check_inputs(k, xs);
    return std::visit(
        [&](const auto& kk) {
            Vector d(xs.rows());
            for (Eigen::Index i = 0; i < xs.rows(); ++i) d(i) = kk.eval(row(xs, i), row(xs, i));
            return d;
        },
        k);
}

std::vector<Matrix> grad_hyper(const AnyKernel& k, const Inputs& xs) {
    check_inputs(k, xs);
    const std::size_t np = num_params(k);
    const Eigen::Index n = xs.rows();
    std::vector<Matrix> out(np, Matrix(n, n));
    std::vector<double> buf(np);
    std::visit(
        [&](const auto& kk) {
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = j; i < n; ++i) {
                    kk.eval_grad(row(xs, i), row(xs, j), buf);
                    for (std::size_t d = 0; d < np; ++d) {
                        out[d](i, j) = buf[d];
                        out[d](j, i) = buf[d];
                    }
                }
            }
        },
        k);
    return out;
}

Vector contract_grad(const AnyKernel& k, const Inputs& xs, const Matrix& weights) {
    check_inputs(k, xs);
    const std::size_t np = num_params(k);
    const Eigen::Index n = xs.rows();
    if (weights.rows() != n || weights.cols() != n) throw DimensionMismatch("contract_grad: weight matrix size");
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(np));
    std::vector<double> buf(np);
    std::visit(
        [&](const auto& kk) {
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = j; i < n; ++i) {
                    const double w = (i == j ? 1.0 : 2.0) * weights(i, j);
                    if (w == 0.0) continue;
                    kk.eval_grad(row(xs, i), row(xs, j), buf);
                    for (std::size_t d = 0; d < np; ++d) acc(static_cast<Eigen::Index>(d)) += w * buf[d];
                }
            }
        },
        k);
    return acc;
}

}  // namespace stackgp::kernels
