#include "tae/trainer.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tae {

Phase phase_of(long epoch, long phase_length) {
  if (phase_length < 1) {
    throw std::invalid_argument("phase_of: phase_length must be >= 1");
  }
  if (epoch < 0) {
    throw std::invalid_argument("phase_of: epoch must be >= 0");
  }
  return (epoch / phase_length) % 2 == 0 ? Phase::kWeights : Phase::kStructure;
}

const char* phase_code(Phase phase) {
  return phase == Phase::kWeights ? "W" : "S";
}

void TrainConfig::validate() const {
  if (embedding_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("config: dimensions must be positive");
  }
  if (epochs < 0) {
    throw std::invalid_argument("config: epochs must be >= 0");
  }
  if (phase_length < 1) {
    throw std::invalid_argument("config: phase_length must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("config: learning_rate must be positive");
  }
  if (!(temperature_start > 0.0) || !(temperature_min > 0.0)) {
    throw std::invalid_argument("config: temperatures must be positive");
  }
  if (temperature_min > temperature_start) {
    throw std::invalid_argument(
        "config: temperature_min must not exceed temperature_start");
  }
  if (!(temperature_decay > 0.0) || temperature_decay > 1.0) {
    throw std::invalid_argument("config: temperature_decay must be in (0, 1]");
  }
}

ModelParams ModelParams::init(const TrainConfig& config, Rng& rng) {
  ModelParams p;
  p.encoder = EncoderParams::zeros(config.embedding_dim, config.hidden_dim);
  p.decoder = DecoderParams::zeros(config.embedding_dim, config.hidden_dim);
  for (auto& [name, tensor] : p.named_tensors()) {
    for (double& v : tensor->values) {
      v = rng.uniform(-0.1, 0.1);
    }
  }
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  return {
      {"encoder.W_leaf", &encoder.W_leaf},
      {"encoder.b_leaf", &encoder.b_leaf},
      {"encoder.W_comp", &encoder.W_comp},
      {"encoder.b_comp", &encoder.b_comp},
      {"encoder.q", &encoder.q},
      {"decoder.W_left", &decoder.W_left},
      {"decoder.b_left", &decoder.b_left},
      {"decoder.W_right", &decoder.W_right},
      {"decoder.b_right", &decoder.b_right},
      {"decoder.W_out", &decoder.W_out},
      {"decoder.b_out", &decoder.b_out},
  };
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors()
    const {
  auto mutable_view = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, tensor] : mutable_view) {
    out.emplace_back(name, tensor);
  }
  return out;
}

std::vector<Tensor*> ModelParams::structure_set() { return {&encoder.q}; }

std::vector<Tensor*> ModelParams::weight_set() {
  std::vector<Tensor*> out;
  for (auto& [name, tensor] : named_tensors()) {
    if (tensor != &encoder.q) {
      out.push_back(tensor);
    }
  }
  return out;
}

std::vector<TrainDoc> prepare_corpus(const std::vector<EduDocument>& docs,
                                     const EmbeddingTable& table,
                                     OovStats* stats) {
  std::vector<TrainDoc> out;
  out.reserve(docs.size());
  for (const EduDocument& doc : docs) {
    TrainDoc prepared;
    prepared.doc_id = doc.doc_id;
    for (const auto& tokens : doc.edus) {
      prepared.edu_vecs.push_back(edu_embedding(tokens, table, stats));
    }
    out.push_back(std::move(prepared));
  }
  return out;
}

double temperature_at(const TrainConfig& config, long epoch) {
  double tau = config.temperature_start;
  for (long i = 0; i < epoch; ++i) {
    tau = std::max(config.temperature_min, tau * config.temperature_decay);
  }
  return tau;
}

double train_epoch(const std::vector<TrainDoc>& corpus, ModelParams& params,
                   Phase phase, const TrainConfig& config, double temperature,
                   Rng& rng) {
  if (corpus.empty()) {
    throw std::invalid_argument("train_epoch: corpus is empty");
  }

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  if (config.shuffle) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
  }

  const SelectMode mode =
      phase == Phase::kStructure ? SelectMode::kSample : SelectMode::kArgmax;

  double total = 0.0;
  for (std::size_t idx : order) {
    const TrainDoc& doc = corpus[idx];
    Graph graph;
    BoundEncoder enc = bind(graph, params.encoder);
    BoundDecoder dec = bind(graph, params.decoder);

    std::vector<Var> inputs;
    inputs.reserve(doc.edu_vecs.size());
    for (const auto& vec : doc.edu_vecs) {
      if (vec.size() != config.embedding_dim) {
        throw std::invalid_argument("train_epoch: document '" + doc.doc_id +
                                    "' has an EDU embedding of dimension " +
                                    std::to_string(vec.size()) + ", expected " +
                                    std::to_string(config.embedding_dim));
      }
      inputs.push_back(graph.constant({vec.size()}, vec));
    }

    EncodeResult encoded =
        encode_document(graph, inputs, enc, mode, temperature, rng);
    DecodeResult decoded =
        decode_document(graph, encoded.root, encoded.tree, dec);
    assert(decoded.traversal == encoded.tree);  // tied-structure invariant

    Var loss = reconstruction_loss(decoded.outputs, inputs);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train_epoch: non-finite loss on document '" +
                               doc.doc_id + "'");
    }
    graph.backward(loss);

    // One SGD step per document, restricted to the phase-active set; the
    // inactive set is never written, so it stays bit-identical.
    const std::pair<Tensor*, Var> bound[] = {
        {&params.encoder.W_leaf, enc.W_leaf},
        {&params.encoder.b_leaf, enc.b_leaf},
        {&params.encoder.W_comp, enc.W_comp},
        {&params.encoder.b_comp, enc.b_comp},
        {&params.encoder.q, enc.q},
        {&params.decoder.W_left, dec.W_left},
        {&params.decoder.b_left, dec.b_left},
        {&params.decoder.W_right, dec.W_right},
        {&params.decoder.b_right, dec.b_right},
        {&params.decoder.W_out, dec.W_out},
        {&params.decoder.b_out, dec.b_out},
    };
    for (const auto& [tensor, var] : bound) {
      const bool is_structure = tensor == &params.encoder.q;
      if ((phase == Phase::kStructure) != is_structure) {
        continue;
      }
      const std::vector<double>& grad = var.grad();
      for (std::size_t i = 0; i < tensor->values.size(); ++i) {
        tensor->values[i] -= config.learning_rate * grad[i];
      }
    }
    total += loss_value;
  }
  return total / static_cast<double>(corpus.size());
}

Checkpoint TrainResult::to_checkpoint(const TrainConfig& config) const {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.params = params;
  ckpt.epoch = static_cast<long>(history.size());
  ckpt.rng_state = rng_state;
  ckpt.history = history;
  return ckpt;
}

TrainResult train(const TrainConfig& config, const std::vector<TrainDoc>& corpus,
                  const Checkpoint* resume) {
  config.validate();
  if (corpus.empty()) {
    throw std::invalid_argument("train: corpus is empty");
  }
  for (const TrainDoc& doc : corpus) {
    if (doc.edu_vecs.empty()) {
      throw std::invalid_argument("train: document '" + doc.doc_id +
                                  "' has no EDUs");
    }
    for (const auto& vec : doc.edu_vecs) {
      if (vec.size() != config.embedding_dim) {
        throw std::invalid_argument(
            "train: document '" + doc.doc_id + "' embedding dimension " +
            std::to_string(vec.size()) + " does not match configured " +
            std::to_string(config.embedding_dim));
      }
    }
  }

  Rng rng(config.seed);
  ModelParams params;
  long start_epoch = 0;
  std::vector<EpochRecord> history;
  if (resume) {
    TrainConfig expected = resume->config;
    expected.epochs = config.epochs;
    if (!(expected == config)) {
      throw std::invalid_argument(
          "train: config differs from checkpoint config (only the epoch "
          "budget may change on resume)");
    }
    if (resume->epoch > config.epochs) {
      throw std::invalid_argument(
          "train: checkpoint already has more epochs than requested");
    }
    params = resume->params;
    rng.load_state(resume->rng_state);
    start_epoch = resume->epoch;
    history = resume->history;
  } else {
    params = ModelParams::init(config, rng);
  }

  for (long epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const double tau = temperature_at(config, epoch);
    const Phase phase = phase_of(epoch, config.phase_length);
    const double mean_loss =
        train_epoch(corpus, params, phase, config, tau, rng);
    history.push_back({epoch, phase, mean_loss});
  }

  TrainResult result;
  result.params = std::move(params);
  result.history = std::move(history);
  result.rng_state = rng.save_state();
  return result;
}

std::vector<NamedTree> induce_trees(const ModelParams& params,
                                    const std::vector<TrainDoc>& corpus) {
  std::vector<NamedTree> out;
  out.reserve(corpus.size());
  Rng rng(0);  // argmax mode draws no noise
  for (const TrainDoc& doc : corpus) {
    Graph graph;
    BoundEncoder enc = bind(graph, params.encoder);
    std::vector<Var> inputs;
    inputs.reserve(doc.edu_vecs.size());
    for (const auto& vec : doc.edu_vecs) {
      inputs.push_back(graph.constant({vec.size()}, vec));
    }
    EncodeResult encoded =
        encode_document(graph, inputs, enc, SelectMode::kArgmax, 1.0, rng);
    out.push_back({doc.doc_id, std::move(encoded.tree)});
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'T', 'A', 'E', '1'};

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["embedding_dim"] = c.embedding_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["epochs"] = c.epochs;
  j["phase_length"] = c.phase_length;
  j["learning_rate"] = c.learning_rate;
  j["temperature_start"] = c.temperature_start;
  j["temperature_min"] = c.temperature_min;
  j["temperature_decay"] = c.temperature_decay;
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.epochs = j.at("epochs").get<long>();
  c.phase_length = j.at("phase_length").get<long>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.temperature_start = j.at("temperature_start").get<double>();
  c.temperature_min = j.at("temperature_min").get<double>();
  c.temperature_decay = j.at("temperature_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.shuffle = j.at("shuffle").get<bool>();
  return c;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) {
    throw std::runtime_error("truncated checkpoint: missing header length");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  }
  return v;
}

void write_f64_le(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) {
    throw std::runtime_error("truncated checkpoint: payload cut short");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  nlohmann::json header;
  header["version"] = ckpt.version;
  header["config"] = config_to_json(ckpt.config);
  header["epoch"] = ckpt.epoch;
  header["rng"] = ckpt.rng_state;
  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& rec : ckpt.history) {
    nlohmann::json item;
    item["epoch"] = rec.epoch;
    item["phase"] = phase_code(rec.phase);
    item["loss"] = rec.mean_loss;
    history.push_back(std::move(item));
  }
  header["history"] = std::move(history);
  nlohmann::json directory = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.params.named_tensors()) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = tensor->shape;
    directory.push_back(std::move(entry));
  }
  header["tensors"] = std::move(directory);

  const std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  out.write(kMagic, 4);
  write_u32_le(out, static_cast<std::uint32_t>(header_bytes.size()));
  out.write(header_bytes.data(), static_cast<long>(header_bytes.size()));
  for (const auto& [name, tensor] : ckpt.params.named_tensors()) {
    for (double v : tensor->values) {
      write_f64_le(out, v);
    }
  }
  if (!out) {
    throw std::runtime_error("error writing checkpoint: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(
        "unsupported checkpoint version: bad magic (expected TAE1)");
  }
  const std::uint32_t header_len = read_u32_le(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), header_len);
  if (!in) {
    throw std::runtime_error("truncated checkpoint: header cut short");
  }
  nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
  if (header.is_discarded()) {
    throw std::runtime_error("malformed checkpoint header");
  }

  Checkpoint ckpt;
  ckpt.version = header.at("version").get<std::uint32_t>();
  if (ckpt.version != 1) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(ckpt.version));
  }
  ckpt.config = config_from_json(header.at("config"));
  ckpt.config.validate();
  ckpt.epoch = header.at("epoch").get<long>();
  ckpt.rng_state = header.at("rng").get<std::string>();
  for (const auto& item : header.at("history")) {
    EpochRecord rec;
    rec.epoch = item.at("epoch").get<long>();
    rec.phase = item.at("phase").get<std::string>() == "S" ? Phase::kStructure
                                                           : Phase::kWeights;
    rec.mean_loss = item.at("loss").get<double>();
    ckpt.history.push_back(rec);
  }

  ckpt.params.encoder =
      EncoderParams::zeros(ckpt.config.embedding_dim, ckpt.config.hidden_dim);
  ckpt.params.decoder =
      DecoderParams::zeros(ckpt.config.embedding_dim, ckpt.config.hidden_dim);
  auto expected = ckpt.params.named_tensors();
  const auto& directory = header.at("tensors");
  if (directory.size() != expected.size()) {
    throw std::runtime_error("checkpoint tensor directory has " +
                             std::to_string(directory.size()) +
                             " entries, expected " +
                             std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& entry = directory[i];
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    if (name != expected[i].first) {
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) +
                               " is '" + name + "', expected '" +
                               expected[i].first + "'");
    }
    if (shape != expected[i].second->shape) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               shape_str(shape) + ", expected " +
                               shape_str(expected[i].second->shape) +
                               " for the stored config");
    }
  }
  for (auto& [name, tensor] : ckpt.params.named_tensors()) {
    for (double& v : tensor->values) {
      v = read_f64_le(in);
    }
  }
  in.peek();
  if (!in.eof()) {
    throw std::runtime_error("checkpoint has trailing bytes after payload");
  }
  return ckpt;
}

}  // namespace tae
