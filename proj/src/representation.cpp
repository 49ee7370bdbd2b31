#include "dasa/representation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dasa/errors.hpp"

namespace dasa {
namespace {

constexpr int kFormatVersion = 1;

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::relu: return z.cwiseMax(0.0);
    }
    return z;
}

// Derivative expressed through the activation output where possible.
Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z, const Eigen::MatrixXd& out) {
    switch (a) {
        case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
        case Activation::tanh: return (1.0 - out.array().square()).matrix();
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

void validate(int input_dim, const SaeConfig& config) {
    if (config.layer_sizes.empty()) throw ValidationError("layer_sizes must be non-empty");
    for (int w : config.layer_sizes) {
        if (w < 1) throw ValidationError("layer widths must be >= 1");
    }
    if (config.layer_sizes.back() >= input_dim) {
        throw ValidationError("latent dimension " + std::to_string(config.layer_sizes.back()) +
                              " must be smaller than the input dimension " + std::to_string(input_dim));
    }
    if (!(config.learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (config.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

struct ForwardPass {
    std::vector<Eigen::MatrixXd> pre;   // z_l
    std::vector<Eigen::MatrixXd> post;  // a_l; post[0] is the input (features x samples)
};

ForwardPass forward(const SaeWeights& w, const Eigen::MatrixXd& input_cols, std::size_t n_layers) {
    ForwardPass fp;
    fp.post.push_back(input_cols);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = w.layers[l];
        Eigen::MatrixXd z = layer.weights * fp.post.back();
        z.colwise() += layer.bias;
        const bool linear_output = l + 1 == w.layers.size();
        fp.post.push_back(linear_output ? z : activate(w.activation, z));
        fp.pre.push_back(std::move(z));
    }
    return fp;
}

void require_input_dim(const SaeWeights& w, const Eigen::MatrixXd& x) {
    if (x.cols() != w.input_dim()) {
        throw DimensionError("autoencoder expects " + std::to_string(w.input_dim()) + " columns, got " +
                             std::to_string(x.cols()));
    }
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    throw ValidationError("unknown activation '" + name + "'");
}

SaeConfig SaeConfig::five_hidden_layers() {
    SaeConfig c;
    c.layer_sizes = {128, 64, 16};
    return c;
}

SaeWeights init_sae(int input_dim, const SaeConfig& config) {
    validate(input_dim, config);
    SaeWeights w;
    w.activation = config.activation;
    w.layer_sizes = config.layer_sizes;
    w.input_mean = Eigen::VectorXd::Zero(input_dim);
    w.input_scale = Eigen::VectorXd::Ones(input_dim);

    std::vector<int> widths{input_dim};
    widths.insert(widths.end(), config.layer_sizes.begin(), config.layer_sizes.end());
    for (auto it = config.layer_sizes.rbegin() + 1; it != config.layer_sizes.rend(); ++it) widths.push_back(*it);
    widths.push_back(input_dim);

    std::mt19937_64 rng(config.seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l], out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = u(rng);
        }
        layer.bias = Eigen::VectorXd::Zero(out);
        w.layers.push_back(std::move(layer));
    }
    return w;
}

Eigen::MatrixXd standardize_inputs(const SaeWeights& w, const Eigen::MatrixXd& x) {
    require_input_dim(w, x);
    Eigen::MatrixXd out = x.rowwise() - w.input_mean.transpose();
    out.array().rowwise() /= w.input_scale.transpose().array();
    return out;
}

Eigen::MatrixXd encode(const SaeWeights& w, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd cols = standardize_inputs(w, x).transpose();
    return forward(w, cols, w.encoder_depth()).post.back().transpose();
}

Eigen::MatrixXd reconstruct(const SaeWeights& w, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd cols = standardize_inputs(w, x).transpose();
    return forward(w, cols, w.layers.size()).post.back().transpose();
}

double reconstruction_mse(const SaeWeights& w, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd z = standardize_inputs(w, x);
    return (reconstruct(w, x) - z).squaredNorm() / static_cast<double>(z.size());
}

LossGradient reconstruction_loss_gradient(const SaeWeights& w, const Eigen::MatrixXd& standardized) {
    const Eigen::MatrixXd target = standardized.transpose();
    const ForwardPass fp = forward(w, target, w.layers.size());
    const double count = static_cast<double>(target.size());

    LossGradient out;
    const Eigen::MatrixXd residual = fp.post.back() - target;
    out.loss = residual.squaredNorm() / count;

    std::vector<Eigen::MatrixXd> grad_w(w.layers.size());
    std::vector<Eigen::VectorXd> grad_b(w.layers.size());
    Eigen::MatrixXd delta = (2.0 / count) * residual;
    for (std::size_t l = w.layers.size(); l-- > 0;) {
        grad_w[l] = delta * fp.post[l].transpose();
        grad_b[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = w.layers[l].weights.transpose() * delta;
            delta = back.cwiseProduct(activation_derivative(w.activation, fp.pre[l - 1], fp.post[l]));
        }
    }

    Eigen::Index total = 0;
    for (const auto& layer : w.layers) total += layer.weights.size() + layer.bias.size();
    out.gradient.resize(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        out.gradient.segment(at, grad_w[l].size()) = Eigen::Map<const Eigen::VectorXd>(grad_w[l].data(), grad_w[l].size());
        at += grad_w[l].size();
        out.gradient.segment(at, grad_b[l].size()) = grad_b[l];
        at += grad_b[l].size();
    }
    return out;
}

Eigen::VectorXd flatten_parameters(const SaeWeights& w) {
    Eigen::Index total = 0;
    for (const auto& layer : w.layers) total += layer.weights.size() + layer.bias.size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    for (const auto& layer : w.layers) {
        flat.segment(at, layer.weights.size()) =
            Eigen::Map<const Eigen::VectorXd>(layer.weights.data(), layer.weights.size());
        at += layer.weights.size();
        flat.segment(at, layer.bias.size()) = layer.bias;
        at += layer.bias.size();
    }
    return flat;
}

void assign_parameters(SaeWeights& w, const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for (auto& layer : w.layers) {
        const Eigen::Index nw = layer.weights.size(), nb = layer.bias.size();
        if (at + nw + nb > flat.size()) throw DimensionError("parameter vector too short");
        Eigen::Map<Eigen::VectorXd>(layer.weights.data(), nw) = flat.segment(at, nw);
        at += nw;
        layer.bias = flat.segment(at, nb);
        at += nb;
    }
    if (at != flat.size()) throw DimensionError("parameter vector too long");
}

SaeWeights train_sae(const Eigen::MatrixXd& covariates, const SaeConfig& config) {
    if (covariates.rows() < 2) throw ValidationError("autoencoder training needs at least 2 rows");
    if (!covariates.allFinite()) throw ValidationError("autoencoder input contains non-finite values");
    const int d = static_cast<int>(covariates.cols());
    SaeWeights w = init_sae(d, config);

    w.input_mean = covariates.colwise().mean().transpose();
    const Eigen::MatrixXd centered = covariates.rowwise() - w.input_mean.transpose();
    w.input_scale = (centered.colwise().squaredNorm() / static_cast<double>(covariates.rows())).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < w.input_scale.size(); ++j) {
        if (w.input_scale(j) < 1e-12) w.input_scale(j) = 1.0;
    }
    const Eigen::MatrixXd z = standardize_inputs(w, covariates);

    // Adam state.
    Eigen::VectorXd params = flatten_parameters(w);
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    const auto n = static_cast<std::size_t>(covariates.rows());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 shuffle_rng(config.seed ^ 0x5A5A5A5AULL);
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            Eigen::MatrixXd rows(static_cast<Eigen::Index>(stop - start), z.cols());
            for (std::size_t r = start; r < stop; ++r) rows.row(static_cast<Eigen::Index>(r - start)) = z.row(order[r]);

            const LossGradient lg = reconstruction_loss_gradient(w, rows);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) throw TrainingDiverged(epoch);
            epoch_loss += lg.loss * static_cast<double>(stop - start);

            ++step;
            m1 = beta1 * m1 + (1.0 - beta1) * lg.gradient;
            m2 = beta2 * m2 + (1.0 - beta2) * lg.gradient.cwiseAbs2();
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            params.array() -= config.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
            assign_parameters(w, params);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss) || !params.allFinite()) throw TrainingDiverged(epoch);
        w.training_loss_history.push_back(epoch_loss);
    }
    return w;
}

nlohmann::json sae_to_json(const SaeWeights& w) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json doc;
    doc["format"] = "dasa-sae";
    doc["version"] = kFormatVersion;
    doc["activation"] = to_string(w.activation);
    doc["layer_sizes"] = w.layer_sizes;
    doc["input_mean"] = vec(w.input_mean);
    doc["input_scale"] = vec(w.input_scale);
    doc["training_loss_history"] = w.training_loss_history;
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& layer : w.layers) {
        layers.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"weights", std::vector<double>(layer.weights.data(),
                                                          layer.weights.data() + layer.weights.size())},
                          {"bias", vec(layer.bias)}});
    }
    return doc;
}

SaeWeights sae_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "dasa-sae") throw DataError("not an autoencoder weights file");
        if (doc.at("version").get<int>() != kFormatVersion) {
            throw DataError("unsupported autoencoder weights version " + doc.at("version").dump());
        }
        auto vec = [](const nlohmann::json& j) {
            const auto v = j.get<std::vector<double>>();
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        };
        SaeWeights w;
        w.activation = activation_from_string(doc.at("activation").get<std::string>());
        w.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
        w.input_mean = vec(doc.at("input_mean"));
        w.input_scale = vec(doc.at("input_scale"));
        w.training_loss_history = doc.at("training_loss_history").get<std::vector<double>>();
        Eigen::Index width = w.input_mean.size();
        for (const auto& jl : doc.at("layers")) {
            DenseLayer layer;
            const auto rows = jl.at("rows").get<Eigen::Index>(), cols = jl.at("cols").get<Eigen::Index>();
            const auto flat = jl.at("weights").get<std::vector<double>>();
            if (cols != width || static_cast<Eigen::Index>(flat.size()) != rows * cols) {
                throw DataError("autoencoder layer shapes do not chain");
            }
            layer.weights = Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, cols);
            layer.bias = vec(jl.at("bias"));
            if (layer.bias.size() != rows) throw DataError("bias length does not match layer width");
            width = rows;
            w.layers.push_back(std::move(layer));
        }
        if (width != w.input_mean.size() || w.layers.size() != 2 * w.layer_sizes.size()) {
            throw DataError("autoencoder layer shapes do not chain");
        }
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed autoencoder weights: ") + e.what());
    }
}

void save_sae(const SaeWeights& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << sae_to_json(w).dump(1) << '\n';
}

SaeWeights load_sae(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cannot parse " + path + ": " + e.what());
    }
    return sae_from_json(doc);
}

}  // namespace dasa
