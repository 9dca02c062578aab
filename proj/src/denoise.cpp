#include "psipde/denoise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "psipde/rng.hpp"

namespace psipde {

const char* to_string(Optimizer o) { return o == Optimizer::momentum ? "momentum" : "adam"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "momentum") return Optimizer::momentum;
  if (name == "adam") return Optimizer::adam;
  throw Error(ErrorCode::invalid_argument, "unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "split_fraction must lie in (0, 1)");
  }
  if (patience < 1) throw Error(ErrorCode::invalid_argument, "patience must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::invalid_argument, "max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning_rate must be positive");
  if (batch_size < 0) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::invalid_argument, "momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error(ErrorCode::invalid_argument, "lr_decay must lie in (0, 1]");
  if (decay_patience < 1) throw Error(ErrorCode::invalid_argument, "decay_patience must be >= 1");
  if (hidden.empty()) throw Error(ErrorCode::invalid_argument, "at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw Error(ErrorCode::invalid_argument, "hidden layer sizes must be positive");
  }
}

SurrogateModel::SurrogateModel(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2 || sizes_.back() != 1) {
    throw Error(ErrorCode::invalid_argument, "layer sizes must run from the input dimension to 1");
  }
  CounterRng rng(seed, 0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1) throw Error(ErrorCode::invalid_argument, "layer sizes must be positive");
    const double scale = 1.0 / std::sqrt(double(sizes_[l]));
    Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
    }
    w_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
  in_mean.assign(std::size_t(sizes_.front()), 0.0);
  in_std.assign(std::size_t(sizes_.front()), 1.0);
}

std::size_t SurrogateModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += std::size_t(w_[l].size() + b_[l].size());
  return n;
}

Eigen::VectorXd SurrogateModel::parameters() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    p.segment(k, w_[l].size()) = w_[l].reshaped();
    k += w_[l].size();
    p.segment(k, b_[l].size()) = b_[l];
    k += b_[l].size();
  }
  return p;
}

void SurrogateModel::set_parameters(const Eigen::VectorXd& p) {
  if (std::size_t(p.size()) != parameter_count()) {
    throw Error(ErrorCode::dimension_mismatch, "parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w_[l].reshaped() = p.segment(k, w_[l].size());
    k += w_[l].size();
    b_[l] = p.segment(k, b_[l].size());
    k += b_[l].size();
  }
}

Eigen::RowVectorXd SurrogateModel::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim()) throw Error(ErrorCode::dimension_mismatch, "input dimension does not match model");
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    a = ((w_[l] * a).colwise() + b_[l]).array().tanh().matrix();
  }
  return ((w_.back() * a).colwise() + b_.back()).row(0);
}

double SurrogateModel::loss(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y, Eigen::VectorXd* grad) const {
  if (x.rows() != input_dim() || x.cols() != y.size() || y.size() == 0) {
    throw Error(ErrorCode::dimension_mismatch, "loss inputs have inconsistent shapes");
  }
  const std::size_t layers = w_.size();
  std::vector<Eigen::MatrixXd> act(layers);
  act[0] = x;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    act[l + 1] = ((w_[l] * act[l]).colwise() + b_[l]).array().tanh().matrix();
  }
  const Eigen::RowVectorXd out = ((w_.back() * act.back()).colwise() + b_.back()).row(0);
  const Eigen::RowVectorXd r = out - y;
  const double n = double(y.size());
  const double value = r.squaredNorm() / n;
  if (!grad) return value;

  grad->resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offset(layers);
  for (std::size_t l = 0, k = 0; l < layers; ++l) {
    offset[l] = Eigen::Index(k);
    k += std::size_t(w_[l].size() + b_[l].size());
  }
  Eigen::MatrixXd delta = (2.0 / n) * r;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd gw = delta * act[l].transpose();
    grad->segment(offset[l], gw.size()) = gw.reshaped();
    grad->segment(offset[l] + gw.size(), b_[l].size()) = delta.rowwise().sum();
    if (l > 0) delta = ((w_[l].transpose() * delta).array() * (1.0 - act[l].array().square())).matrix();
  }
  return value;
}

Eigen::MatrixXd SurrogateModel::normalize_inputs(const Eigen::MatrixXd& raw) const {
  if (raw.rows() != input_dim()) throw Error(ErrorCode::dimension_mismatch, "input dimension does not match model");
  Eigen::MatrixXd x(raw.rows(), raw.cols());
  for (Eigen::Index d = 0; d < raw.rows(); ++d) {
    x.row(d) = (raw.row(d).array() - in_mean[std::size_t(d)]) / in_std[std::size_t(d)];
  }
  return x;
}

Eigen::RowVectorXd SurrogateModel::predict(const Eigen::MatrixXd& raw) const {
  return (forward(normalize_inputs(raw)).array() * out_std + out_mean).matrix();
}

Eigen::MatrixXd grid_coordinates(const Grid& grid) {
  const std::size_t dims = 1 + std::size_t(grid.spatial_dims());
  Eigen::MatrixXd c(Eigen::Index(dims), Eigen::Index(grid.size()));
  Eigen::Index k = 0;
  for (std::size_t it = 0; it < grid.nt(); ++it) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      for (std::size_t iy = 0; iy < grid.ny(); ++iy, ++k) {
        c(0, k) = grid.t.at(it);
        c(1, k) = grid.x.at(ix);
        if (grid.y) c(2, k) = grid.y->at(iy);
      }
    }
  }
  return c;
}

namespace {

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), Eigen::Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(Eigen::Index(k)) = m.col(Eigen::Index(idx[k]));
  return out;
}

Eigen::RowVectorXd gather(const Eigen::RowVectorXd& v, std::span<const std::size_t> idx) {
  Eigen::RowVectorXd out(Eigen::Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(Eigen::Index(k)) = v(Eigen::Index(idx[k]));
  return out;
}

void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

SurrogateModel fit_surrogate(const FieldTensor& noisy, const TrainConfig& cfg) {
  cfg.validate();
  const Grid& g = noisy.grid();
  const Eigen::MatrixXd raw = grid_coordinates(g);
  std::vector<int> sizes{int(raw.rows())};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  SurrogateModel model(sizes, derive_seed(cfg.seed, "init"));

  for (Eigen::Index d = 0; d < raw.rows(); ++d) {
    const double mu = raw.row(d).mean();
    const double sd = std::sqrt((raw.row(d).array() - mu).square().mean());
    model.in_mean[std::size_t(d)] = mu;
    model.in_std[std::size_t(d)] = sd > 0.0 ? sd : 1.0;
  }
  const FieldStats st = field_stats(noisy);
  model.out_mean = st.mean;
  model.out_std = st.std > 0.0 ? st.std : 1.0;

  const Eigen::MatrixXd x = model.normalize_inputs(raw);
  Eigen::RowVectorXd y(Eigen::Index(noisy.size()));
  for (std::size_t i = 0; i < noisy.size(); ++i) y(Eigen::Index(i)) = (noisy.values()[i] - model.out_mean) / model.out_std;

  std::vector<std::size_t> order(noisy.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng split_rng(derive_seed(cfg.seed, "split"));
  shuffle(order, split_rng);
  const std::size_t n_trn = std::clamp<std::size_t>(
      std::size_t(std::lround(cfg.split_fraction * double(order.size()))), 1, order.size() - 1);
  std::vector<std::size_t> trn(order.begin(), order.begin() + std::ptrdiff_t(n_trn));
  const std::vector<std::size_t> val(order.begin() + std::ptrdiff_t(n_trn), order.end());
  std::sort(trn.begin(), trn.end());
  const Eigen::MatrixXd x_trn = gather_cols(x, trn), x_val = gather_cols(x, val);
  const Eigen::RowVectorXd y_trn = gather(y, trn), y_val = gather(y, val);

  const std::size_t batch =
      cfg.batch_size == 0 ? n_trn : std::min<std::size_t>(std::size_t(cfg.batch_size), n_trn);
  const bool full_batch = batch == n_trn;
  CounterRng batch_rng(derive_seed(cfg.seed, "batches"));

  Eigen::VectorXd p = model.parameters();
  Eigen::VectorXd best = p;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p.size()), m2 = Eigen::VectorXd::Zero(p.size());
  Eigen::VectorXd grad;
  double lr = cfg.learning_rate;
  long adam_t = 0;
  int since_best = 0, since_decay = 0;
  TrainingHistory& h = model.history;
  h.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> perm(n_trn);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (!full_batch) shuffle(perm, batch_rng);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < n_trn; start += batch) {
      const std::size_t end = std::min(n_trn, start + batch);
      double l = 0.0;
      if (full_batch) {
        l = model.loss(x_trn, y_trn, &grad);
      } else {
        const std::span<const std::size_t> idx(perm.data() + start, end - start);
        l = model.loss(gather_cols(x_trn, idx), gather(y_trn, idx), &grad);
      }
      if (!std::isfinite(l) || !grad.allFinite()) {
        throw Error(ErrorCode::training_diverged, "training diverged; lower learning rate");
      }
      train_sum += l * double(end - start);
      if (cfg.optimizer == Optimizer::momentum) {
        m1 = cfg.momentum * m1 - lr * grad;
        p += m1;
      } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++adam_t;
        m1 = b1 * m1 + (1.0 - b1) * grad;
        m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, double(adam_t)), c2 = 1.0 - std::pow(b2, double(adam_t));
        p.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      }
      model.set_parameters(p);
    }
    const double v = model.loss(x_val, y_val);
    if (!std::isfinite(v)) throw Error(ErrorCode::training_diverged, "training diverged; lower learning rate");
    h.train_loss.push_back(train_sum / double(n_trn));
    h.val_loss.push_back(v);
    if (v < h.best_val_loss) {
      h.best_val_loss = v;
      h.best_epoch = epoch;
      best = p;
      since_best = since_decay = 0;
    } else {
      ++since_best;
      if (++since_decay >= cfg.decay_patience) {
        lr *= cfg.lr_decay;
        since_decay = 0;
      }
      if (since_best >= cfg.patience) break;
    }
  }
  model.set_parameters(best);
  return model;
}

FieldTensor resample(const SurrogateModel& model, const Grid& grid) {
  grid.validate();
  if (model.input_dim() != 1 + grid.spatial_dims()) {
    throw Error(ErrorCode::dimension_mismatch, "grid dimension does not match surrogate inputs");
  }
  const Eigen::RowVectorXd u = model.predict(grid_coordinates(grid));
  return FieldTensor(grid, std::vector<double>(u.data(), u.data() + u.size()));
}

double finite_diff_gradient_check(const SurrogateModel& model, const Eigen::MatrixXd& points,
                                  const Eigen::RowVectorXd& targets, int n_coords, double step, std::uint64_t seed) {
  if (n_coords < 1) throw Error(ErrorCode::invalid_argument, "n_coords must be positive");
  const Eigen::MatrixXd x = model.normalize_inputs(points);
  const Eigen::RowVectorXd y = ((targets.array() - model.out_mean) / model.out_std).matrix();
  Eigen::VectorXd grad;
  model.loss(x, y, &grad);
  SurrogateModel probe = model;
  const Eigen::VectorXd p0 = model.parameters();
  CounterRng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < n_coords; ++k) {
    const Eigen::Index i = Eigen::Index(rng.below(std::uint64_t(p0.size())));
    Eigen::VectorXd p = p0;
    p(i) = p0(i) + step;
    probe.set_parameters(p);
    const double up = probe.loss(x, y);
    p(i) = p0(i) - step;
    probe.set_parameters(p);
    const double down = probe.loss(x, y);
    const double fd = (up - down) / (2.0 * step);
    // absolute floor keeps coordinates with vanishing gradient meaningful
    const double denom = std::max({std::abs(fd), std::abs(grad(i)), 1e-7});
    worst = std::max(worst, std::abs(fd - grad(i)) / denom);
  }
  return worst;
}

namespace {

constexpr unsigned char kModelMagic[4] = {0x50, 0x53, 0x49, 0x4e};  // "PSIN"
constexpr std::uint16_t kModelVersion = 1;

template <typename U>
void put(std::vector<unsigned char>& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}
void put_f64(std::vector<unsigned char>& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  template <typename U>
  U get() {
    if (pos + sizeof(U) > bytes.size()) throw Error(ErrorCode::truncated_payload, "truncated payload");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[pos + i]) << (8 * i));
    pos += sizeof(U);
    return v;
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
};

}  // namespace

void save_model(const SurrogateModel& model, const std::filesystem::path& path) {
  std::vector<unsigned char> out(std::begin(kModelMagic), std::end(kModelMagic));
  put(out, kModelVersion);
  put(out, std::uint32_t(model.layer_sizes().size()));
  for (int s : model.layer_sizes()) put(out, std::uint32_t(s));
  for (std::size_t d = 0; d < model.in_mean.size(); ++d) {
    put_f64(out, model.in_mean[d]);
    put_f64(out, model.in_std[d]);
  }
  put_f64(out, model.out_mean);
  put_f64(out, model.out_std);
  const Eigen::VectorXd p = model.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) put_f64(out, p(i));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

SurrogateModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || !std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin())) {
    throw Error(ErrorCode::bad_magic, "bad magic");
  }
  ByteReader r{bytes, 4};
  if (r.get<std::uint16_t>() != kModelVersion) throw Error(ErrorCode::bad_magic, "unsupported model version");
  const std::uint32_t n_layers = r.get<std::uint32_t>();
  if (n_layers < 2 || n_layers > 64) throw Error(ErrorCode::dimension_mismatch, "implausible layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint32_t s = r.get<std::uint32_t>();
    if (s == 0 || s > 1u << 16) throw Error(ErrorCode::dimension_mismatch, "implausible layer size");
    sizes.push_back(int(s));
  }
  SurrogateModel m(sizes, 0);
  for (std::size_t d = 0; d < m.in_mean.size(); ++d) {
    m.in_mean[d] = r.f64();
    m.in_std[d] = r.f64();
  }
  m.out_mean = r.f64();
  m.out_std = r.f64();
  Eigen::VectorXd p(static_cast<Eigen::Index>(m.parameter_count()));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = r.f64();
  if (r.pos != bytes.size()) throw Error(ErrorCode::dimension_mismatch, "trailing bytes after model payload");
  m.set_parameters(p);
  return m;
}

}  // namespace psipde
