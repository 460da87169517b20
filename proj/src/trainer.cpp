#include "lumen/trainer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lumen/errors.hpp"

namespace lumen {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dense {
    MatrixXd w;  // out x in
    VectorXd b;
    VectorXd scale;  // bnn only
    MatrixXd mask;   // empty unless pruned
};

MatrixXd batch_inputs(const std::vector<std::vector<double>>& images, const std::vector<std::size_t>& idx,
                      std::size_t begin, std::size_t end) {
    const auto dim = static_cast<Eigen::Index>(images[idx[begin]].size());
    MatrixXd x(dim, static_cast<Eigen::Index>(end - begin));
    for (std::size_t j = begin; j < end; ++j)
        for (Eigen::Index i = 0; i < dim; ++i) x(i, static_cast<Eigen::Index>(j - begin)) = images[idx[j]][i];
    return x;
}

MatrixXd softmax_grad(const MatrixXd& logits, const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                      std::size_t begin) {
    MatrixXd g = logits;
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const double m = g.col(c).maxCoeff();
        g.col(c) = (g.col(c).array() - m).exp();
        g.col(c) /= g.col(c).sum();
        g(labels[idx[begin + static_cast<std::size_t>(c)]], c) -= 1.0;
    }
    return g / static_cast<double>(g.cols());
}

void check_data(const Dataset& data, const std::vector<int>& widths) {
    if (data.size() == 0) throw DataError("training set is empty");
    if (widths.size() < 2) throw ShapeError("a network needs at least input and output widths");
    for (int w : widths)
        if (w < 1) throw ShapeError("layer widths must be positive");
    if (static_cast<int>(data.images.front().size()) != widths.front())
        throw ShapeError("input width does not match the data");
}

std::vector<Dense> init_layers(const std::vector<int>& widths, std::mt19937_64& rng, bool bnn) {
    std::vector<Dense> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l];
        const int out = widths[l + 1];
        Dense d;
        d.w.resize(out, in);
        const double s = bnn ? 0.1 : std::sqrt(2.0 / in);
        std::normal_distribution<double> n(0.0, s);
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c) d.w(r, c) = n(rng);
        d.b = VectorXd::Zero(out);
        d.scale = VectorXd::Constant(out, 1.0 / std::sqrt(static_cast<double>(in)));
        layers.push_back(std::move(d));
    }
    return layers;
}

void train_float(std::vector<Dense>& layers, const Dataset& data, const TrainOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::vector<MatrixXd> vw;
    std::vector<VectorXd> vb;
    for (const auto& d : layers) {
        vw.push_back(MatrixXd::Zero(d.w.rows(), d.w.cols()));
        vb.push_back(VectorXd::Zero(d.b.size()));
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t nl = layers.size();
    for (int epoch = 0; epoch < o.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const double lr = o.learning_rate * (epoch < o.epochs * 3 / 4 ? 1.0 : 0.2);
        for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(o.batch)) {
            const std::size_t end = std::min(idx.size(), begin + static_cast<std::size_t>(o.batch));
            std::vector<MatrixXd> acts{batch_inputs(data.images, idx, begin, end)};
            for (std::size_t l = 0; l < nl; ++l) {
                MatrixXd z = (layers[l].w * acts.back()).colwise() + layers[l].b;
                if (l + 1 < nl) z = z.cwiseMax(0.0);
                acts.push_back(std::move(z));
            }
            MatrixXd g = softmax_grad(acts.back(), data.labels, idx, begin);
            for (std::size_t l = nl; l-- > 0;) {
                MatrixXd gw = g * acts[l].transpose();
                VectorXd gb = g.rowwise().sum();
                if (l > 0) g = (layers[l].w.transpose() * g).cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
                vw[l] = 0.9 * vw[l] - lr * gw;
                vb[l] = 0.9 * vb[l] - lr * gb;
                layers[l].w += vw[l];
                layers[l].b += vb[l];
                if (layers[l].mask.size() != 0) layers[l].w = layers[l].w.cwiseProduct(layers[l].mask);
            }
        }
    }
}

double sgn(double v) { return v >= 0.0 ? 1.0 : -1.0; }

struct Adam {
    MatrixXd m, v;
    int t = 0;
    void init(Eigen::Index r, Eigen::Index c) {
        m = MatrixXd::Zero(r, c);
        v = MatrixXd::Zero(r, c);
    }
    void step(MatrixXd& p, const MatrixXd& g, double lr) {
        ++t;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(0.9, t);
        const double c2 = 1.0 - std::pow(0.999, t);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
    }
};

std::vector<std::vector<double>> quantized_images(const Dataset& data, int bits) {
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    for (const auto& img : data.images) {
        const auto q = quantize_layer_input(img, bits);
        std::vector<double> x(img.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = q.normalized[i] * q.scale;
        out.push_back(std::move(x));
    }
    return out;
}

Model to_model(const std::string& name, const std::vector<Dense>& layers, bool bnn, int activation_bits) {
    Model m;
    m.name = name;
    if (bnn) {
        m.quant.scheme = QuantScheme::binary_weights;
        m.quant.weight_bits = 1;
        m.quant.activation_bits = activation_bits;
    }
    std::size_t record = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& d = layers[l];
        LayerIR ir;
        ir.name = "fc" + std::to_string(l + 1);
        ir.kind = LayerKind::fully_connected;
        ir.in_features = static_cast<int>(d.w.cols());
        ir.out_features = static_cast<int>(d.w.rows());
        const bool last = l + 1 == layers.size();
        ir.activation = last ? Activation::identity : bnn ? Activation::sign : Activation::relu;
        ir.has_bias = !bnn;
        ir.has_bn = bnn;
        ir.weight_ref = {record, static_cast<std::size_t>(d.w.size())};
        record += bnn ? 3 : 2;
        LayerWeights p;
        p.weights.resize(static_cast<std::size_t>(d.w.size()));
        for (Eigen::Index r = 0; r < d.w.rows(); ++r)
            for (Eigen::Index c = 0; c < d.w.cols(); ++c)
                p.weights[static_cast<std::size_t>(r * d.w.cols() + c)] = d.w(r, c);
        std::vector<double> b(d.b.data(), d.b.data() + d.b.size());
        if (bnn) {
            p.bn_scale.assign(d.scale.data(), d.scale.data() + d.scale.size());
            p.bn_shift = b;
        } else {
            p.bias = b;
        }
        ir.sparsity = sparsity_of(p.weights);
        if (ir.sparsity >= 1.0) ir.sparsity = 0.0;
        m.layers.push_back(ir);
        m.params.push_back(std::move(p));
    }
    return m;
}

std::vector<Dense> from_model(const Model& m) {
    std::vector<Dense> out;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& ir = m.layers[l];
        const auto& p = m.params[l];
        Dense d;
        d.w.resize(ir.rows(), ir.fan_in());
        for (Eigen::Index r = 0; r < d.w.rows(); ++r)
            for (Eigen::Index c = 0; c < d.w.cols(); ++c)
                d.w(r, c) = p.weights[static_cast<std::size_t>(r * d.w.cols() + c)];
        d.b = VectorXd::Zero(ir.rows());
        if (ir.has_bias) d.b = Eigen::Map<const VectorXd>(p.bias.data(), ir.rows());
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace

Model train_mlp(const Dataset& data, const std::vector<int>& widths, const TrainOptions& options) {
    check_data(data, widths);
    std::mt19937_64 rng(options.seed);
    auto layers = init_layers(widths, rng, false);
    train_float(layers, data, options);
    return to_model("mlp", layers, false, 16);
}

Model train_bnn(const Dataset& data, const std::vector<int>& widths, int activation_bits,
                const TrainOptions& o) {
    check_data(data, widths);
    if (activation_bits < 1 || activation_bits > 16) throw DomainError("activation bits must lie in [1,16]");
    std::mt19937_64 rng(o.seed);
    auto layers = init_layers(widths, rng, true);
    const auto images = quantized_images(data, activation_bits);
    const std::size_t nl = layers.size();
    std::vector<Adam> aw(nl), as(nl), ab(nl);
    for (std::size_t l = 0; l < nl; ++l) {
        aw[l].init(layers[l].w.rows(), layers[l].w.cols());
        as[l].init(layers[l].scale.size(), 1);
        ab[l].init(layers[l].b.size(), 1);
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int epoch = 0; epoch < o.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const double lr = o.learning_rate * 0.5 * (1.0 + std::cos(M_PI * epoch / o.epochs));
        for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(o.batch)) {
            const std::size_t end = std::min(idx.size(), begin + static_cast<std::size_t>(o.batch));
            std::vector<MatrixXd> inputs{batch_inputs(images, idx, begin, end)};
            std::vector<MatrixXd> signs, pre, dots;
            for (std::size_t l = 0; l < nl; ++l) {
                signs.push_back(layers[l].w.unaryExpr(&sgn));
                MatrixXd h = signs[l] * inputs.back();
                MatrixXd a = (layers[l].scale.asDiagonal() * h).colwise() + layers[l].b;
                dots.push_back(std::move(h));
                if (l + 1 < nl) inputs.push_back(a.unaryExpr(&sgn));
                pre.push_back(std::move(a));
            }
            MatrixXd g = softmax_grad(pre.back(), data.labels, idx, begin);
            for (std::size_t l = nl; l-- > 0;) {
                const MatrixXd gs = g.cwiseProduct(dots[l]).rowwise().sum();
                const MatrixXd gb = g.rowwise().sum();
                const MatrixXd gh = layers[l].scale.asDiagonal() * g;
                MatrixXd gw = (gh * inputs[l].transpose())
                                  .cwiseProduct((layers[l].w.array().abs() <= 1.0).cast<double>().matrix());
                if (l > 0)
                    g = (signs[l].transpose() * gh)
                            .cwiseProduct((pre[l - 1].array().abs() <= 1.0).cast<double>().matrix());
                aw[l].step(layers[l].w, gw, lr);
                MatrixXd s = layers[l].scale;
                as[l].step(s, gs, lr * 0.1);
                MatrixXd b = layers[l].b;
                ab[l].step(b, gb, lr);
                layers[l].w = layers[l].w.cwiseMax(-1.0).cwiseMin(1.0);
                for (Eigen::Index i = 0; i < s.size(); ++i)
                    if (std::abs(s(i, 0)) < 1e-4) s(i, 0) = s(i, 0) < 0.0 ? -1e-4 : 1e-4;
                layers[l].scale = s.col(0);
                layers[l].b = b.col(0);
            }
        }
    }
    return to_model("bnn", layers, true, activation_bits);
}

Model prune_and_recover(const Model& model, const Dataset& data, double sparsity, int cluster_bits,
                        const TrainOptions& options) {
    model.validate();
    if (model.quant.scheme == QuantScheme::binary_weights)
        throw DomainError("prune_and_recover expects a full-precision model");
    for (const auto& l : model.layers)
        if (l.kind != LayerKind::fully_connected || l.has_bn)
            throw DomainError("prune_and_recover supports fully connected layers without batch norm");
    if (cluster_bits < 1 || cluster_bits > 16) throw DomainError("cluster bits must lie in [1,16]");
    auto layers = from_model(model);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto pruned = prune_magnitude(model.params[l].weights, sparsity);
        auto& d = layers[l];
        d.mask.resize(d.w.rows(), d.w.cols());
        for (Eigen::Index r = 0; r < d.w.rows(); ++r)
            for (Eigen::Index c = 0; c < d.w.cols(); ++c) {
                const double v = pruned[static_cast<std::size_t>(r * d.w.cols() + c)];
                d.mask(r, c) = v == 0.0 ? 0.0 : 1.0;
                d.w(r, c) = v;
            }
    }
    train_float(layers, data, options);
    Model out = to_model(model.name + "_pruned", layers, false, model.quant.activation_bits);
    out.quant = model.quant;
    out.quant.scheme = QuantScheme::cluster;
    out.quant.weight_bits = cluster_bits;
    out.quant.cluster_count = 1 << cluster_bits;
    return out;
}

std::vector<double> float_forward(const Model& model, const std::vector<double>& input) {
    std::vector<double> x = input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& ir = model.layers[l];
        const auto& p = model.params[l];
        const QuantSpec q = ir.quant.value_or(model.quant);
        const bool binary = q.scheme == QuantScheme::binary_weights;
        if (ir.kind != LayerKind::fully_connected) throw CapabilityError("float_forward handles fully connected layers");
        if (static_cast<int>(x.size()) != ir.in_features) throw ShapeError("float_forward: input size mismatch");
        if (binary) {
            const auto qi = quantize_layer_input(x, q.activation_bits);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = qi.normalized[i] * qi.scale;
        }
        std::vector<double> y(static_cast<std::size_t>(ir.out_features));
        for (int r = 0; r < ir.out_features; ++r) {
            double dot = 0.0;
            for (int c = 0; c < ir.in_features; ++c) {
                const double w = p.weights[static_cast<std::size_t>(r) * ir.in_features + c];
                dot += (binary ? sgn(w) : w) * x[c];
            }
            if (ir.has_bn) dot = p.bn_scale[r] * dot + p.bn_shift[r];
            if (ir.has_bias) dot += p.bias[r];
            y[r] = l + 1 == model.layers.size() ? dot : apply_activation(ir.activation, dot);
        }
        x = std::move(y);
    }
    return x;
}

double evaluate_float(const Model& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (argmax(float_forward(model, data.images[i])) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lumen
