#include "botuq/io/checkpoint.hpp"

#include <fstream>
#include <map>

#include "json.hpp"

#include "botuq/errors.hpp"

namespace botuq::io {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix<double>& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix<double> matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw ValidationError("checkpoint: malformed matrix for " + what);
  Index rows = j.at("rows").get<Index>();
  Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() ||
      static_cast<Index>(data.size()) != rows * cols)
    throw ValidationError("checkpoint: bad matrix shape for " + what);
  Matrix<double> m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

json vector_to_json(const RowVector<double>& v) {
  json data = json::array();
  for (Index i = 0; i < v.cols(); ++i) data.push_back(v(i));
  return data;
}

RowVector<double> vector_from_json(const json& j, Index width, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != width)
    throw ValidationError("checkpoint: bad vector length for " + what);
  RowVector<double> v(width);
  for (Index i = 0; i < width; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json vocabulary_to_json(const bloc::Vocabulary& vocab) {
  return json{{"words", vocab.words},
              {"doc_freq", vocab.doc_freq},
              {"total_docs", vocab.total_docs}};
}

bloc::Vocabulary vocabulary_from_json(const json& j) {
  bloc::Vocabulary vocab;
  if (!j.is_object() || !j.contains("words") || !j.contains("doc_freq") ||
      !j.contains("total_docs"))
    throw ValidationError("vocabulary: missing fields");
  vocab.words = j.at("words").get<std::vector<std::string>>();
  vocab.doc_freq = j.at("doc_freq").get<std::vector<std::int64_t>>();
  vocab.total_docs = j.at("total_docs").get<std::int64_t>();
  if (vocab.words.size() != vocab.doc_freq.size())
    throw ValidationError("vocabulary: words and doc_freq lengths differ");
  return vocab;
}

json load_json_file(const std::string& path, const char* expected_format) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string(expected_format) + ": cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(expected_format) + ": " + path +
                          " is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != expected_format)
    throw ValidationError(path + " is not a " + expected_format + " file");
  if (j.value("version", 0) != 1)
    throw ValidationError(path + ": unsupported version");
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("failed writing " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, bnn::BayesianModel<double>& model,
                     const bloc::Vocabulary* vocabulary) {
  const auto& cfg = model.config();
  json params = json::object();
  for (auto* p : model.all_parameters()) params[p->name] = matrix_to_json(p->value);
  json norm = json::array();
  for (auto* state : model.norm_states())
    norm.push_back(json{{"mean", vector_to_json(state->running_mean)},
                        {"var", vector_to_json(state->running_var)},
                        {"momentum", state->momentum},
                        {"eps", state->eps}});
  json j{{"format", "botuq-checkpoint"},
         {"version", 1},
         {"model",
          {{"input_width", cfg.input_width},
           {"hidden_widths", cfg.hidden_widths},
           {"flow_len", cfg.flow_len},
           {"r_flow_len", cfg.r_flow_len},
           {"mode", cfg.mode == bnn::ModelMode::Bayesian ? "bayesian" : "deterministic"},
           {"aleatoric", cfg.aleatoric},
           {"parameters", std::move(params)},
           {"norm", std::move(norm)}}}};
  if (vocabulary != nullptr) j["vocabulary"] = vocabulary_to_json(*vocabulary);
  write_json_file(path, j);
}

Checkpoint load_checkpoint(const std::string& path) {
  json j = load_json_file(path, "botuq-checkpoint");
  if (!j.contains("model")) throw ValidationError(path + ": missing model section");
  const json& jm = j.at("model");

  bnn::ModelConfig<double> cfg;
  try {
    cfg.input_width = jm.at("input_width").get<Index>();
    cfg.hidden_widths = jm.at("hidden_widths").get<std::vector<Index>>();
    cfg.flow_len = jm.at("flow_len").get<Index>();
    cfg.r_flow_len = jm.at("r_flow_len").get<Index>();
    std::string mode = jm.at("mode").get<std::string>();
    if (mode == "bayesian") cfg.mode = bnn::ModelMode::Bayesian;
    else if (mode == "deterministic") cfg.mode = bnn::ModelMode::Deterministic;
    else throw ValidationError(path + ": unknown mode '" + mode + "'");
    cfg.aleatoric = jm.at("aleatoric").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed model section: " + e.what());
  }

  Checkpoint ckpt{bnn::BayesianModel<double>(cfg), std::nullopt};
  if (!jm.contains("parameters") || !jm.at("parameters").is_object())
    throw ValidationError(path + ": missing parameters");
  const json& jp = jm.at("parameters");
  std::size_t used = 0;
  for (auto* p : ckpt.model.all_parameters()) {
    if (!jp.contains(p->name))
      throw ValidationError(path + ": parameter '" + p->name + "' missing");
    Matrix<double> value = matrix_from_json(jp.at(p->name), p->name);
    if (value.rows() != p->value.rows() || value.cols() != p->value.cols())
      throw ValidationError(path + ": parameter '" + p->name + "' has the wrong shape");
    p->value = std::move(value);
    ++used;
  }
  if (used != jp.size())
    throw ValidationError(path + ": checkpoint carries unknown parameters");

  auto states = ckpt.model.norm_states();
  if (!jm.contains("norm") || !jm.at("norm").is_array() ||
      jm.at("norm").size() != states.size())
    throw ValidationError(path + ": normalization state count mismatch");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const json& jn = jm.at("norm")[i];
    Index width = states[i]->width();
    states[i]->running_mean = vector_from_json(jn.at("mean"), width, "norm mean");
    states[i]->running_var = vector_from_json(jn.at("var"), width, "norm var");
    states[i]->momentum = jn.at("momentum").get<double>();
    states[i]->eps = jn.at("eps").get<double>();
  }

  if (j.contains("vocabulary") && !j.at("vocabulary").is_null())
    ckpt.vocabulary = vocabulary_from_json(j.at("vocabulary"));
  return ckpt;
}

void save_vocabulary(const std::string& path, const bloc::Vocabulary& vocabulary) {
  json j = vocabulary_to_json(vocabulary);
  j["format"] = "botuq-vocabulary";
  j["version"] = 1;
  write_json_file(path, j);
}

bloc::Vocabulary load_vocabulary(const std::string& path) {
  return vocabulary_from_json(load_json_file(path, "botuq-vocabulary"));
}

}  // namespace botuq::io
