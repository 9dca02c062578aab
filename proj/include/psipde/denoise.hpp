#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psipde/core.hpp"

namespace psipde {

enum class Optimizer { momentum, adam };
const char* to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  double split_fraction = 0.8;
  int patience = 30;
  int max_epochs = 200;
  double learning_rate = 3e-3;
  int batch_size = 256;  // 0: full batch
  double momentum = 0.9;
  Optimizer optimizer = Optimizer::adam;
  // Learning rate is multiplied by lr_decay after decay_patience epochs
  // without a new best validation loss.
  double lr_decay = 0.5;
  int decay_patience = 10;
  std::vector<int> hidden = {32, 32, 32};
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

// Fully connected tanh network with a linear output, mapping normalized
// coordinates (t, x[, y]) to a normalized field value.
class SurrogateModel {
 public:
  SurrogateModel() = default;
  // Weights drawn from N(0, 1/fan_in) with the given seed; zero biases.
  SurrogateModel(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);

  // Raw-coordinate normalization constants.
  std::vector<double> in_mean, in_std;
  double out_mean = 0.0, out_std = 1.0;
  TrainingHistory history;

  // Network output on normalized inputs, one column per point.
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const;
  // Mean squared error on normalized targets and, if requested, its
  // gradient with respect to parameters() by backpropagation.
  double loss(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y, Eigen::VectorXd* grad = nullptr) const;

  Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& raw) const;
  // Predictions in original units at raw coordinates (one column per point).
  Eigen::RowVectorXd predict(const Eigen::MatrixXd& raw) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

// Coordinates of every grid node as columns of a (dims x size) matrix, in
// FieldTensor order.
Eigen::MatrixXd grid_coordinates(const Grid& grid);

SurrogateModel fit_surrogate(const FieldTensor& noisy, const TrainConfig& cfg);
FieldTensor resample(const SurrogateModel& model, const Grid& grid);

// Compares backpropagated gradients of the training loss with central
// differences on `n_coords` randomly chosen parameters; returns the largest
// relative error. `points` are raw coordinates, `targets` raw values.
double finite_diff_gradient_check(const SurrogateModel& model, const Eigen::MatrixXd& points,
                                  const Eigen::RowVectorXd& targets, int n_coords = 10, double step = 1e-6,
                                  std::uint64_t seed = 0);

// Binary checkpoint: "PSIN", u16 version, u32 layer count, layer sizes,
// normalization constants, then weights and biases as f64, little-endian.
void save_model(const SurrogateModel& model, const std::filesystem::path& path);
SurrogateModel load_model(const std::filesystem::path& path);

}  // namespace psipde
