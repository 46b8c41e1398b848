#include "metdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "metdet/error.hpp"

namespace metdet {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_same_size(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw validation_error("DimensionMismatch",
                           "vector sizes differ: " + std::to_string(u.size()) + " vs " +
                               std::to_string(v.size()));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require_same_size(u, v);
  double uu = 0, vv = 0, uv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  const double c = uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

std::vector<double> concat_with_cosine(std::span<const double> u,
                                       std::span<const double> v) {
  require_same_size(u, v);
  std::vector<double> out;
  out.reserve(u.size() + v.size() + 1);
  out.insert(out.end(), u.begin(), u.end());
  out.insert(out.end(), v.begin(), v.end());
  out.push_back(cosine_similarity(u, v));
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double phi_big = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double phi_small = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi_big + x * phi_small;
}

std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double z = e0 + e1;
  return {e0 / z, e1 / z};
}

double weighted_cross_entropy(const std::array<double, 2>& logits, int label,
                              double class_weight) {
  if (label != 0 && label != 1)
    throw validation_error("BadLabel", "label must be 0 or 1");
  const double weight = label == 1 ? class_weight : 1.0;
  const double m = std::max(logits[0], logits[1]);
  const double lse =
      m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return weight * (lse - logits[static_cast<std::size_t>(label)]);
}

void Linear::init(int in_dim, int out_dim, Rng& rng) {
  in = in_dim;
  out = out_dim;
  w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
  b.assign(static_cast<std::size_t>(out), 0.0);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& x : w) x = rng.normal(0.0, stddev);
}

std::vector<double> Linear::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in)
    throw validation_error("DimensionMismatch",
                           "layer expects " + std::to_string(in) + " inputs, got " +
                               std::to_string(x.size()));
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int o = 0; o < out; ++o) {
    double acc = b[static_cast<std::size_t>(o)];
    const double* row = &w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in)];
    for (int i = 0; i < in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

std::vector<std::vector<double>*> HeadGradients::tensors() {
  return {&mip_w,     &mip_b,     &helper1_w,    &helper1_b,
          &helper2_w, &helper2_b, &classifier_w, &classifier_b};
}

void HeadGradients::scale(double factor) {
  for (auto* t : tensors())
    for (double& x : *t) x *= factor;
}

ContrastHead::ContrastHead(int d, int h, double dropout_rate, std::uint64_t seed)
    : d_(d), h_(h), dropout_rate_(dropout_rate) {
  if (d <= 0 || h <= 0)
    throw validation_error("BadHeadShape", "head dimensions must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw validation_error("BadHeadShape", "dropout rate must lie in [0, 1)");
  Rng rng(seed);
  mip_.init(2 * d + 1, h, rng);
  helper1_.init(2 * d + 1, h, rng);
  helper2_.init(2 * d + 1, h, rng);
  classifier_.init(3 * h, 2, rng);
}

std::vector<double> ContrastHead::layer_input(std::span<const double> a,
                                              std::span<const double> b) const {
  if (static_cast<int>(a.size()) != d_ || static_cast<int>(b.size()) != d_)
    throw validation_error("DimensionMismatch",
                           "head expects " + std::to_string(d_) + "-dimensional views");
  return concat_with_cosine(a, b);
}

std::vector<double> ContrastHead::mip_forward(std::span<const double> h_c,
                                              std::span<const double> h_b) const {
  std::vector<double> z = mip_.forward(layer_input(h_c, h_b));
  for (double& x : z) x = gelu(x);
  return z;
}

std::vector<double> ContrastHead::helper_forward(std::span<const double> e_def,
                                                 std::span<const double> e_t,
                                                 HelperKind which) const {
  const Linear& layer = which == HelperKind::Sense ? helper1_ : helper2_;
  std::vector<double> z = layer.forward(layer_input(e_def, e_t));
  for (double& x : z) x = gelu(x);
  return z;
}

std::array<double, 2> ContrastHead::classify(std::span<const double> h_mip,
                                             std::span<const double> h_1,
                                             std::span<const double> h_2) const {
  if (static_cast<int>(h_mip.size()) != h_ || static_cast<int>(h_1.size()) != h_ ||
      static_cast<int>(h_2.size()) != h_)
    throw validation_error("DimensionMismatch", "hidden vectors must have size h");
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(3 * h_));
  u.insert(u.end(), h_mip.begin(), h_mip.end());
  u.insert(u.end(), h_1.begin(), h_1.end());
  u.insert(u.end(), h_2.begin(), h_2.end());
  const std::vector<double> logits = classifier_.forward(u);
  return {logits[0], logits[1]};
}

std::array<double, 2> ContrastHead::logits(const EncodedViews& views) const {
  const auto h_mip = mip_forward(views.h_c, views.h_b);
  const auto h_1 = helper_forward(views.e_tc, views.e_t, HelperKind::Sense);
  const auto h_2 = helper_forward(views.e_tb, views.e_t, HelperKind::Basic);
  return classify(h_mip, h_1, h_2);
}

double ContrastHead::p_metaphor(const EncodedViews& views) const {
  return softmax2(logits(views))[1];
}

int ContrastHead::predict(const EncodedViews& views) const {
  return p_metaphor(views) > 0.5 ? 1 : 0;
}

HeadGradients ContrastHead::zero_gradients() const {
  HeadGradients g;
  g.mip_w.assign(mip_.w.size(), 0.0);
  g.mip_b.assign(mip_.b.size(), 0.0);
  g.helper1_w.assign(helper1_.w.size(), 0.0);
  g.helper1_b.assign(helper1_.b.size(), 0.0);
  g.helper2_w.assign(helper2_.w.size(), 0.0);
  g.helper2_b.assign(helper2_.b.size(), 0.0);
  g.classifier_w.assign(classifier_.w.size(), 0.0);
  g.classifier_b.assign(classifier_.b.size(), 0.0);
  return g;
}

namespace {

// keep-probability-scaled dropout mask; entries are 0 or 1/(1-p)
std::vector<double> sample_mask(std::size_t n, double rate, Rng* rng) {
  std::vector<double> mask(n, 1.0);
  if (rng == nullptr || rate <= 0.0) return mask;
  const double scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng->bernoulli(rate) ? 0.0 : scale;
  return mask;
}

std::vector<double> apply_mask(const std::vector<double>& x,
                               const std::vector<double>& mask) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  return y;
}

void accumulate_affine(const std::vector<double>& dz, const std::vector<double>& x,
                       std::vector<double>& gw, std::vector<double>& gb) {
  const std::size_t out = dz.size(), in = x.size();
  for (std::size_t o = 0; o < out; ++o) {
    gb[o] += dz[o];
    double* grow = &gw[o * in];
    const double dzo = dz[o];
    for (std::size_t i = 0; i < in; ++i) grow[i] += dzo * x[i];
  }
}

}  // namespace

double ContrastHead::loss_and_accumulate(const EncodedViews& views, int label,
                                         double class_weight, HeadGradients& grads,
                                         Rng* dropout_rng) const {
  const auto xm = apply_mask(layer_input(views.h_c, views.h_b),
                             sample_mask(static_cast<std::size_t>(2 * d_ + 1),
                                         dropout_rate_, dropout_rng));
  const auto x1 = apply_mask(layer_input(views.e_tc, views.e_t),
                             sample_mask(static_cast<std::size_t>(2 * d_ + 1),
                                         dropout_rate_, dropout_rng));
  const auto x2 = apply_mask(layer_input(views.e_tb, views.e_t),
                             sample_mask(static_cast<std::size_t>(2 * d_ + 1),
                                         dropout_rate_, dropout_rng));

  const auto zm = mip_.forward(xm);
  const auto z1 = helper1_.forward(x1);
  const auto z2 = helper2_.forward(x2);

  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(3 * h_));
  for (double z : zm) u.push_back(gelu(z));
  for (double z : z1) u.push_back(gelu(z));
  for (double z : z2) u.push_back(gelu(z));
  const auto mask_u = sample_mask(u.size(), dropout_rate_, dropout_rng);
  const auto u_dropped = apply_mask(u, mask_u);

  const std::vector<double> logit_vec = classifier_.forward(u_dropped);
  const std::array<double, 2> logits = {logit_vec[0], logit_vec[1]};
  const double loss = weighted_cross_entropy(logits, label, class_weight);
  const auto p = softmax2(logits);

  const double weight = label == 1 ? class_weight : 1.0;
  const std::array<double, 2> dlogits = {weight * (p[0] - (label == 0 ? 1.0 : 0.0)),
                                         weight * (p[1] - (label == 1 ? 1.0 : 0.0))};

  accumulate_affine({dlogits[0], dlogits[1]}, u_dropped, grads.classifier_w,
                    grads.classifier_b);

  const std::size_t hs = static_cast<std::size_t>(h_);
  std::vector<double> du(3 * hs, 0.0);
  for (std::size_t o = 0; o < 2; ++o) {
    const double* row = &classifier_.w[o * 3 * hs];
    for (std::size_t i = 0; i < 3 * hs; ++i) du[i] += row[i] * dlogits[o];
  }
  for (std::size_t i = 0; i < 3 * hs; ++i) du[i] *= mask_u[i];

  std::vector<double> dz(hs);
  for (std::size_t i = 0; i < hs; ++i) dz[i] = du[i] * gelu_derivative(zm[i]);
  accumulate_affine(dz, xm, grads.mip_w, grads.mip_b);
  for (std::size_t i = 0; i < hs; ++i) dz[i] = du[hs + i] * gelu_derivative(z1[i]);
  accumulate_affine(dz, x1, grads.helper1_w, grads.helper1_b);
  for (std::size_t i = 0; i < hs; ++i) dz[i] = du[2 * hs + i] * gelu_derivative(z2[i]);
  accumulate_affine(dz, x2, grads.helper2_w, grads.helper2_b);

  return loss;
}

std::vector<std::pair<std::string, std::vector<double>*>> ContrastHead::tensors() {
  return {{"mip.w", &mip_.w},
          {"mip.b", &mip_.b},
          {"helper1.w", &helper1_.w},
          {"helper1.b", &helper1_.b},
          {"helper2.w", &helper2_.w},
          {"helper2.b", &helper2_.b},
          {"classifier.w", &classifier_.w},
          {"classifier.b", &classifier_.b}};
}

std::vector<std::pair<std::string, const std::vector<double>*>> ContrastHead::tensors()
    const {
  std::vector<std::pair<std::string, const std::vector<double>*>> out;
  for (auto& [name, tensor] : const_cast<ContrastHead*>(this)->tensors())
    out.emplace_back(name, tensor);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

EncoderStack Checkpoint::stack() const {
  EncoderStack s;
  s.sentence = sentence_encoder;
  s.sense = sense_encoder;
  s.basic = basic_encoder;
  return s;
}

std::string Checkpoint::config_value(const std::string& key,
                                     const std::string& fallback) const {
  for (const auto& [k, v] : config)
    if (k == key) return v;
  return fallback;
}

namespace {

void write_tensors(
    std::ostream& out,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& tensors) {
  for (const auto& [name, tensor] : tensors) {
    out << "[tensor] " << name << ' ' << tensor->size() << '\n';
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      if (i) out << ' ';
      out << format_double((*tensor)[i]);
    }
    out << '\n';
  }
}

void read_tensors(
    std::istream& in,
    const std::vector<std::pair<std::string, std::vector<double>*>>& tensors,
    const std::filesystem::path& path) {
  for (const auto& [name, tensor] : tensors) {
    std::string tag, got_name;
    std::size_t count = 0;
    if (!(in >> tag >> got_name >> count) || tag != "[tensor]" || got_name != name ||
        count != tensor->size())
      throw validation_error("CheckpointLayout",
                             path.string() + ": expected tensor '" + name + "' with " +
                                 std::to_string(tensor->size()) + " values");
    for (double& x : *tensor)
      if (!(in >> x))
        throw validation_error("CheckpointLayout",
                               path.string() + ": truncated tensor '" + name + "'");
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("FileOpen", "cannot write " + path.string());

  out << kCheckpointVersion << '\n';
  out << "[config] " << ckpt.config.size() << '\n';
  for (const auto& [k, v] : ckpt.config) out << k << '\t' << v << '\n';
  out << "[vocab] " << ckpt.vocab.size() << '\n';
  for (const auto& t : ckpt.vocab.tokens()) out << t << '\n';
  out << "[model] dim=" << ckpt.dim << " hidden=" << ckpt.hidden
      << " max_len=" << ckpt.max_len << " dropout=" << format_double(ckpt.dropout)
      << " shared=" << (ckpt.shared_definition_encoders ? 1 : 0) << '\n';

  out << "[encoder] sentence\n";
  write_tensors(out, std::as_const(*ckpt.sentence_encoder).tensors());
  out << "[encoder] sense\n";
  write_tensors(out, std::as_const(*ckpt.sense_encoder).tensors());
  if (!ckpt.shared_definition_encoders) {
    out << "[encoder] basic\n";
    write_tensors(out, std::as_const(*ckpt.basic_encoder).tensors());
  }
  out << "[head]\n";
  write_tensors(out, static_cast<const ContrastHead&>(ckpt.head).tensors());
  out << "[end]\n";
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw validation_error("CheckpointVersion", path.string() + ": empty checkpoint");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCheckpointVersion)
    throw validation_error("CheckpointVersion",
                           path.string() + ": format version '" + line +
                               "' does not match " + kCheckpointVersion);

  Checkpoint ckpt;
  std::string tag;
  std::size_t config_count = 0;
  if (!(in >> tag >> config_count) || tag != "[config]")
    throw validation_error("CheckpointLayout", path.string() + ": missing config block");
  std::getline(in, line);
  for (std::size_t i = 0; i < config_count; ++i) {
    if (!std::getline(in, line))
      throw validation_error("CheckpointLayout", path.string() + ": truncated config");
    const auto sep = line.find('\t');
    if (sep == std::string::npos)
      throw validation_error("CheckpointLayout", path.string() + ": bad config line");
    ckpt.config.emplace_back(line.substr(0, sep), line.substr(sep + 1));
  }

  std::size_t vocab_count = 0;
  if (!(in >> tag >> vocab_count) || tag != "[vocab]")
    throw validation_error("CheckpointLayout", path.string() + ": missing vocab block");
  std::getline(in, line);
  std::vector<std::string> tokens;
  tokens.reserve(vocab_count);
  for (std::size_t i = 0; i < vocab_count; ++i) {
    if (!std::getline(in, line))
      throw validation_error("CheckpointLayout", path.string() + ": truncated vocab");
    tokens.push_back(line);
  }
  ckpt.vocab = Vocab::from_tokens(std::move(tokens));

  int shared_flag = 0;
  {
    std::string model_line;
    if (!std::getline(in, model_line))
      throw validation_error("CheckpointLayout", path.string() + ": missing model line");
    std::istringstream ms(model_line);
    std::string model_tag;
    ms >> model_tag;
    if (model_tag != "[model]")
      throw validation_error("CheckpointLayout", path.string() + ": missing model line");
    std::string kv;
    while (ms >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      if (key == "dim") ckpt.dim = std::stoi(value);
      else if (key == "hidden") ckpt.hidden = std::stoi(value);
      else if (key == "max_len") ckpt.max_len = std::stoi(value);
      else if (key == "dropout") ckpt.dropout = std::stod(value);
      else if (key == "shared") shared_flag = std::stoi(value);
    }
  }
  if (ckpt.dim <= 0 || ckpt.hidden <= 0 || ckpt.max_len <= 0)
    throw validation_error("CheckpointLayout", path.string() + ": bad model dimensions");
  ckpt.shared_definition_encoders = shared_flag != 0;

  auto read_encoder = [&](const char* expected_name) {
    std::string enc_tag, enc_name;
    if (!(in >> enc_tag >> enc_name) || enc_tag != "[encoder]" ||
        enc_name != expected_name)
      throw validation_error("CheckpointLayout",
                             path.string() + ": expected encoder '" +
                                 expected_name + "'");
    auto enc = std::make_shared<ToyEncoder>(ckpt.vocab.size(), ckpt.dim, ckpt.max_len,
                                            /*seed=*/0);
    read_tensors(in, enc->tensors(), path);
    return enc;
  };
  ckpt.sentence_encoder = read_encoder("sentence");
  ckpt.sense_encoder = read_encoder("sense");
  ckpt.basic_encoder =
      ckpt.shared_definition_encoders ? ckpt.sense_encoder : read_encoder("basic");

  if (!(in >> tag) || tag != "[head]")
    throw validation_error("CheckpointLayout", path.string() + ": missing head block");
  ckpt.head = ContrastHead(ckpt.dim, ckpt.hidden, ckpt.dropout, /*seed=*/0);
  read_tensors(in, ckpt.head.tensors(), path);

  if (!(in >> tag) || tag != "[end]")
    throw validation_error("CheckpointLayout", path.string() + ": missing end marker");
  return ckpt;
}

}  // namespace metdet
