#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace dasa {

enum class Activation { sigmoid, tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct SaeConfig {
    std::vector<int> layer_sizes{150, 100, 5};  // encoder widths; the last is the latent dimension
    Activation activation = Activation::tanh;
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;  // Adam step size
    std::uint64_t seed = 0;

    /// Encoder (128, 64, 16) with its mirrored decoder: five hidden layers.
    static SaeConfig five_hidden_layers();
};

struct DenseLayer {
    Eigen::MatrixXd weights;  // (out x in)
    Eigen::VectorXd bias;     // (out)
};

/// Encoder layers followed by the mirrored (untied) decoder. Every layer but the
/// final reconstruction applies the activation. Inputs are standardised with the
/// stored training statistics before the first layer.
struct SaeWeights {
    Activation activation = Activation::tanh;
    std::vector<int> layer_sizes;
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    std::vector<DenseLayer> layers;
    std::vector<double> training_loss_history;  // epoch-mean reconstruction MSE

    int input_dim() const { return static_cast<int>(input_mean.size()); }
    int latent_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.back(); }
    std::size_t encoder_depth() const { return layer_sizes.size(); }
};

/// Glorot-uniform weights, zero biases and identity standardisation.
SaeWeights init_sae(int input_dim, const SaeConfig& config);

/// Fits standardisation statistics on `covariates` (rows are samples), then
/// trains the full stack end to end with mini-batch Adam on mean squared
/// reconstruction error. Deterministic given config.seed.
SaeWeights train_sae(const Eigen::MatrixXd& covariates, const SaeConfig& config);

Eigen::MatrixXd standardize_inputs(const SaeWeights& weights, const Eigen::MatrixXd& covariates);
Eigen::MatrixXd encode(const SaeWeights& weights, const Eigen::MatrixXd& covariates);
Eigen::MatrixXd reconstruct(const SaeWeights& weights, const Eigen::MatrixXd& covariates);

/// Mean squared reconstruction error in standardised space.
double reconstruction_mse(const SaeWeights& weights, const Eigen::MatrixXd& covariates);

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as flatten_parameters
};

/// Loss and analytic gradient on already-standardised rows.
LossGradient reconstruction_loss_gradient(const SaeWeights& weights, const Eigen::MatrixXd& standardized);

/// Layer by layer: weights (column-major) then bias.
Eigen::VectorXd flatten_parameters(const SaeWeights& weights);
void assign_parameters(SaeWeights& weights, const Eigen::VectorXd& flat);

nlohmann::json sae_to_json(const SaeWeights& weights);
SaeWeights sae_from_json(const nlohmann::json& doc);
void save_sae(const SaeWeights& weights, const std::string& path);
SaeWeights load_sae(const std::string& path);

}  // namespace dasa
