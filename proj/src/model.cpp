#include "mmehr/model.hpp"
#include "mmehr/random.hpp"

#include <algorithm>
#include <memory>

namespace mmehr {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kFusion: return "fusion";
    case ModelKind::kLstmVars: return "lstm_vars";
    case ModelKind::kTransformerVars: return "transformer_vars";
    case ModelKind::kNotesOnly: return "notes_only";
    case ModelKind::kLstmFusion: return "lstm_fusion";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::kFusion, ModelKind::kLstmVars, ModelKind::kTransformerVars, ModelKind::kNotesOnly,
                      ModelKind::kLstmFusion})
    if (model_kind_name(k) == name) return k;
  throw Error("unknown model kind '" + std::string(name) + "'");
}

void ModelConfig::validate(ModelKind kind) const {
  for (Index d : {hours, notes_dim, ts_dim, notes_out, ts_out, mm_out, layers, heads, ff_dim, lstm_hidden})
    if (d < 1) throw Error("model config: all dimensions must be >= 1");
  for (Index d : head_hidden)
    if (d < 1) throw Error("model config: head hidden dims must be >= 1");
  const Index width = kind == ModelKind::kTransformerVars ? ts_out : mm_out;
  if (kind == ModelKind::kFusion || kind == ModelKind::kTransformerVars) {
    if (width % heads != 0)
      throw Error("model config: transformer width " + std::to_string(width) + " not divisible by " +
                  std::to_string(heads) + " heads");
    if (positions && width % 2 != 0) throw Error("model config: transformer width must be even for positions");
  }
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"L", c.hours},
          {"D1", c.notes_dim},
          {"D2", c.ts_dim},
          {"D3", c.notes_out},
          {"D4", c.ts_out},
          {"D5", c.mm_out},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ff_dim", c.ff_dim},
          {"head_hidden", c.head_hidden},
          {"lstm_hidden", c.lstm_hidden},
          {"notes_pooling", c.notes_pooling == NotesPooling::kMaskedMean ? "masked_mean" : "mean"},
          {"positions", c.positions}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.hours = j.value("L", c.hours);
  c.notes_dim = j.value("D1", c.notes_dim);
  c.ts_dim = j.value("D2", c.ts_dim);
  c.notes_out = j.value("D3", c.notes_out);
  c.ts_out = j.value("D4", c.ts_out);
  c.mm_out = j.value("D5", c.mm_out);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  const std::string pooling = j.value("notes_pooling", std::string("masked_mean"));
  if (pooling == "masked_mean")
    c.notes_pooling = NotesPooling::kMaskedMean;
  else if (pooling == "mean")
    c.notes_pooling = NotesPooling::kMean;
  else
    throw Error("model config: unknown notes_pooling '" + pooling + "'");
  c.positions = j.value("positions", c.positions);
  return c;
}

void Parameters::add(std::string name, Tensor value) {
  if (index_.count(name)) throw Error("duplicate parameter '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

std::size_t Parameters::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Index Parameters::scalar_count() const {
  Index n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

ParamVars::ParamVars(Tape& tape, const Parameters& params, bool requires_grad) : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(tape.leaf(params[i], requires_grad));
}

ParamVars::ParamVars(const Parameters& params, std::vector<Var> vars) : params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size()) throw Error("ParamVars: expected one var per parameter");
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].shape() != params[i].shape()) throw ShapeError("ParamVars " + params.name(i), vars_[i].shape(), params[i].shape());
}

namespace {

Var linear(const ParamVars& p, const std::string& prefix, Var x) {
  return add(matmul(x, p(prefix + ".weight")), p(prefix + ".bias"));
}

Var mlp_head(const ParamVars& p, Var x, std::size_t layers) {
  for (std::size_t i = 0; i + 1 < layers; ++i) x = relu(linear(p, "head." + std::to_string(i), x));
  return linear(p, "head." + std::to_string(layers - 1), x);
}

Var multimodal_encoder(const ParamVars& p, Var notes, Var ts) {
  const Var parts[] = {notes, ts};
  return linear(p, "mm_encoder", concat(parts, -1));
}

Var ts_encoder(const ParamVars& p, Var ts) { return linear(p, "ts_encoder.1", relu(linear(p, "ts_encoder.0", ts))); }

Var pooled_notes(Var notes, const Eigen::VectorXd& presence, NotesPooling pooling) {
  const Index hours = notes.value().dim(0);
  if (presence.size() != hours) throw ShapeError("pooled_notes", notes.shape(), {presence.size()});
  MatrixXd w(1, hours);
  if (pooling == NotesPooling::kMaskedMean) {
    const double count = presence.sum();
    w.row(0) = presence.transpose() / std::max(count, 1.0);
  } else {
    w.setConstant(1.0 / static_cast<double>(hours));
  }
  return matmul(notes.tape->constant(Tensor({1, hours}, std::move(w))), notes);
}

void add_linear(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, Index in, Index outd) {
  out.emplace_back(prefix + ".weight", Shape{in, outd});
  out.emplace_back(prefix + ".bias", Shape{outd});
}

void add_transformer(std::vector<std::pair<std::string, Shape>>& out, Index width, const ModelConfig& c) {
  out.emplace_back("cls", Shape{width});
  for (Index l = 0; l < c.layers; ++l) {
    const std::string pre = "transformer." + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "out"}) add_linear(out, pre + "attn." + proj, width, width);
    out.emplace_back(pre + "ln1.gain", Shape{width});
    out.emplace_back(pre + "ln1.bias", Shape{width});
    add_linear(out, pre + "ff.0", width, c.ff_dim);
    add_linear(out, pre + "ff.1", c.ff_dim, width);
    out.emplace_back(pre + "ln2.gain", Shape{width});
    out.emplace_back(pre + "ln2.bias", Shape{width});
  }
}

void add_head(std::vector<std::pair<std::string, Shape>>& out, Index in, const ModelConfig& c) {
  Index prev = in;
  std::size_t i = 0;
  for (Index h : c.head_hidden) {
    add_linear(out, "head." + std::to_string(i++), prev, h);
    prev = h;
  }
  add_linear(out, "head." + std::to_string(i), prev, 1);
}

void add_lstm(std::vector<std::pair<std::string, Shape>>& out, Index in, Index hidden) {
  out.emplace_back("lstm.input.weight", Shape{in, 4 * hidden});
  out.emplace_back("lstm.recurrent.weight", Shape{hidden, 4 * hidden});
  out.emplace_back("lstm.bias", Shape{4 * hidden});
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(ModelKind kind, const ModelConfig& c) {
  c.validate(kind);
  std::vector<std::pair<std::string, Shape>> out;
  switch (kind) {
    case ModelKind::kFusion:
      add_linear(out, "notes_encoder", c.notes_dim, c.notes_out);
      add_linear(out, "ts_encoder.0", c.ts_dim, c.ts_out);
      add_linear(out, "ts_encoder.1", c.ts_out, c.ts_out);
      add_linear(out, "mm_encoder", c.notes_dim + c.ts_dim, c.mm_out);
      add_transformer(out, c.mm_out, c);
      add_head(out, c.mm_out + c.notes_dim, c);
      break;
    case ModelKind::kTransformerVars:
      add_linear(out, "ts_encoder.0", c.ts_dim, c.ts_out);
      add_linear(out, "ts_encoder.1", c.ts_out, c.ts_out);
      add_transformer(out, c.ts_out, c);
      add_head(out, c.ts_out, c);
      break;
    case ModelKind::kNotesOnly:
      add_head(out, c.notes_dim, c);
      break;
    case ModelKind::kLstmVars:
      add_lstm(out, c.ts_dim, c.lstm_hidden);
      add_head(out, c.lstm_hidden, c);
      break;
    case ModelKind::kLstmFusion:
      add_lstm(out, c.notes_dim + c.ts_dim, c.lstm_hidden);
      add_head(out, c.lstm_hidden, c);
      break;
  }
  return out;
}

EncodedStreams encode_streams(const ParamVars& p, Var notes, Var ts) {
  return {linear(p, "notes_encoder", notes), ts_encoder(p, ts), multimodal_encoder(p, notes, ts)};
}

Var transformer_forward(const ParamVars& p, Var tokens, const ModelConfig& config, ForwardTrace* trace) {
  Tape& tape = *tokens.tape;
  const Index width = tokens.value().dim(1);
  const Index n = tokens.value().dim(0) + 1;
  const Index head_dim = width / config.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Var rows[] = {reshape(p("cls"), {1, width}), tokens};
  Var x = concat(rows, 0);
  if (config.positions) x = add(x, tape.constant(Tensor({n, width}, sinusoidal_positions(n, width))));

  for (Index l = 0; l < config.layers; ++l) {
    const std::string pre = "transformer." + std::to_string(l) + ".";
    const Var q = linear(p, pre + "attn.query", x);
    const Var k = linear(p, pre + "attn.key", x);
    const Var v = linear(p, pre + "attn.value", x);
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(config.heads));
    for (Index h = 0; h < config.heads; ++h) {
      const Var qh = slice(q, 1, h * head_dim, head_dim);
      const Var kh = slice(k, 1, h * head_dim, head_dim);
      const Var vh = slice(v, 1, h * head_dim, head_dim);
      const Var weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
      if (trace) trace->attention.push_back(weights.value().matrix());
      heads.push_back(matmul(weights, vh));
    }
    const Var attended = linear(p, pre + "attn.out", concat(heads, -1));
    x = layer_norm(add(x, attended), p(pre + "ln1.gain"), p(pre + "ln1.bias"));
    const Var ff = linear(p, pre + "ff.1", relu(linear(p, pre + "ff.0", x)));
    x = layer_norm(add(x, ff), p(pre + "ln2.gain"), p(pre + "ln2.bias"));
  }
  return slice(x, 0, 0, 1);
}

namespace {

struct LstmStates {
  MatrixXd i, f, g, o, c, h;  // steps x hidden
};

// Gate order i, f, g, o. Returns the last hidden state.
Var lstm_recurrence(Var projected, Var recurrent, Index hidden) {
  const MatrixXd& x = projected.value().matrix();
  const MatrixXd& r = recurrent.value().matrix();
  const Index steps = x.rows();
  if (x.cols() != 4 * hidden || r.rows() != hidden || r.cols() != 4 * hidden)
    throw ShapeError("lstm", projected.shape(), recurrent.shape());

  auto s = std::make_shared<LstmStates>();
  for (MatrixXd* m : {&s->i, &s->f, &s->g, &s->o, &s->c, &s->h}) m->resize(steps, hidden);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(hidden);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(hidden);
  const auto sigm = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  for (Index t = 0; t < steps; ++t) {
    const Eigen::RowVectorXd a = x.row(t) + h * r;
    for (Index k = 0; k < hidden; ++k) {
      s->i(t, k) = sigm(a(k));
      s->f(t, k) = sigm(a(hidden + k));
      s->g(t, k) = std::tanh(a(2 * hidden + k));
      s->o(t, k) = sigm(a(3 * hidden + k));
    }
    c = s->f.row(t).cwiseProduct(c) + s->i.row(t).cwiseProduct(s->g.row(t));
    h = s->o.row(t).cwiseProduct(c.array().tanh().matrix());
    s->c.row(t) = c;
    s->h.row(t) = h;
  }

  const Var inputs[] = {projected, recurrent};
  return projected.tape->custom(
      inputs, Tensor({1, hidden}, MatrixXd(h)),
      [s, hidden](const Tensor& upstream, std::span<const Tensor* const> in, const Tensor&) {
        const MatrixXd& r = in[1]->matrix();
        const Index steps = s->h.rows();
        MatrixXd dx = MatrixXd::Zero(steps, 4 * hidden);
        MatrixXd dr = MatrixXd::Zero(hidden, 4 * hidden);
        Eigen::RowVectorXd dh = upstream.matrix();
        Eigen::RowVectorXd dc = Eigen::RowVectorXd::Zero(hidden);
        Eigen::RowVectorXd da(4 * hidden);
        for (Index t = steps - 1; t >= 0; --t) {
          for (Index k = 0; k < hidden; ++k) {
            const double i = s->i(t, k), f = s->f(t, k), g = s->g(t, k), o = s->o(t, k);
            const double tc = std::tanh(s->c(t, k));
            const double c_prev = t > 0 ? s->c(t - 1, k) : 0.0;
            const double dct = dc(k) + dh(k) * o * (1.0 - tc * tc);
            da(k) = dct * g * i * (1.0 - i);
            da(hidden + k) = dct * c_prev * f * (1.0 - f);
            da(2 * hidden + k) = dct * i * (1.0 - g * g);
            da(3 * hidden + k) = dh(k) * tc * o * (1.0 - o);
            dc(k) = dct * f;
          }
          dx.row(t) = da;
          if (t > 0) dr.noalias() += s->h.row(t - 1).transpose() * da;
          dh = da * r.transpose();
        }
        return std::vector<Tensor>{Tensor(in[0]->shape(), std::move(dx)), Tensor(in[1]->shape(), std::move(dr))};
      });
}

}  // namespace

Var lstm_forward(const ParamVars& p, Var sequence, Index hidden) {
  // Input projections for all steps at once, then the fused recurrence.
  const Var projected = add(matmul(sequence, p("lstm.input.weight")), p("lstm.bias"));
  return lstm_recurrence(projected, p("lstm.recurrent.weight"), hidden);
}

Model::Model(ModelKind kind, ModelConfig config, Parameters params)
    : kind_(kind), config_(std::move(config)), params_(std::move(params)) {
  const auto layout = parameter_layout(kind_, config_);
  if (layout.size() != params_.size()) throw Error("model: parameter count does not match configuration");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_.name(i) != layout[i].first) throw Error("model: unexpected parameter '" + params_.name(i) + "'");
    if (params_[i].shape() != layout[i].second) throw ShapeError(layout[i].first, params_[i].shape(), layout[i].second);
    if (!params_[i].all_finite()) throw NonFiniteError("parameter " + layout[i].first);
  }
}

Model Model::initialize(ModelKind kind, const ModelConfig& config, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "init");
  Parameters params;
  for (const auto& [name, shape] : parameter_layout(kind, config)) {
    Tensor t(shape);
    const bool is_gain = name.ends_with(".gain");
    if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    } else if (name == "cls") {
      const double limit = std::sqrt(6.0 / static_cast<double>(1 + shape[0]));
      for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    } else if (is_gain) {
      t.matrix().setOnes();
    } else if (name == "lstm.bias") {
      const Index hidden = shape[0] / 4;
      t.matrix().block(0, hidden, 1, hidden).setOnes();
    }
    params.add(name, std::move(t));
  }
  return Model(kind, config, std::move(params));
}

Var Model::logit(const ParamVars& p, const EpisodeVars& in, ForwardTrace* trace) const {
  const auto check_input = [&](Var v, Index cols, const char* what) {
    const Shape expected{config_.hours, cols};
    if (v.shape() != expected) throw ShapeError(what, v.shape(), expected);
  };
  const auto pooled = [&] {
    check_input(in.notes, config_.notes_dim, "notes input");
    if (!in.presence) throw Error("model: presence mask required");
    return pooled_notes(in.notes, *in.presence, config_.notes_pooling);
  };
  const std::size_t head_layers = config_.head_hidden.size() + 1;

  switch (kind_) {
    case ModelKind::kFusion: {
      check_input(in.ts, config_.ts_dim, "time-series input");
      const Var summary = pooled();
      const Var mm = multimodal_encoder(p, in.notes, in.ts);
      const Var joint[] = {transformer_forward(p, mm, config_, trace), summary};
      return mlp_head(p, concat(joint, -1), head_layers);
    }
    case ModelKind::kTransformerVars: {
      check_input(in.ts, config_.ts_dim, "time-series input");
      return mlp_head(p, transformer_forward(p, ts_encoder(p, in.ts), config_, trace), head_layers);
    }
    case ModelKind::kNotesOnly:
      return mlp_head(p, pooled(), head_layers);
    case ModelKind::kLstmVars:
      check_input(in.ts, config_.ts_dim, "time-series input");
      return mlp_head(p, lstm_forward(p, in.ts, config_.lstm_hidden), head_layers);
    case ModelKind::kLstmFusion: {
      check_input(in.notes, config_.notes_dim, "notes input");
      check_input(in.ts, config_.ts_dim, "time-series input");
      const Var parts[] = {in.notes, in.ts};
      return mlp_head(p, lstm_forward(p, concat(parts, -1), config_.lstm_hidden), head_layers);
    }
  }
  throw Error("model: unknown kind");
}

double Model::predict(const MatrixXd& notes, const Eigen::VectorXd& presence, const MatrixXd& ts) const {
  Tape tape;
  const ParamVars p(tape, params_, false);
  const EpisodeVars in{tape.constant(Tensor::from_matrix(notes)), tape.constant(Tensor::from_matrix(ts)), &presence};
  return sigmoid(logit(p, in)).value().item();
}

}  // namespace mmehr
