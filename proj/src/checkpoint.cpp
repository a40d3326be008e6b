#include "revlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "revlab/error.hpp"

namespace revlab::regimes {

using json = nlohmann::ordered_json;
using neural::BiLstmParams;
using neural::HeadParams;
using neural::LstmCell;

namespace {

json matrix_json(const neural::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const neural::Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

neural::Matrix matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ValidationError(fmt::format("checkpoint: {} should have {} rows", what, rows));
  neural::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(fmt::format("checkpoint: {} row {} should have {} columns", what, i, cols));
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

neural::Vector vector_from(const json& j, Eigen::Index n, std::string_view what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw ValidationError(fmt::format("checkpoint: {} should have {} entries", what, n));
  neural::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json lstm_json(const BiLstmParams& p) {
  json j;
  j["input_dim"] = p.input_dim;
  j["hidden_dim"] = p.hidden_dim;
  for (const auto& [name, cell] : {std::pair{"forward", &p.forward}, std::pair{"backward", &p.backward}}) {
    json c;
    c["weights"] = matrix_json(cell->weights);
    c["bias"] = vector_json(cell->bias);
    j[name] = std::move(c);
  }
  return j;
}

BiLstmParams lstm_from(const json& j) {
  const int d = j.at("input_dim").get<int>();
  const int h = j.at("hidden_dim").get<int>();
  auto p = BiLstmParams::zeros(d, h);
  for (auto [name, cell] : {std::pair{"forward", &p.forward}, std::pair{"backward", &p.backward}}) {
    const auto& c = j.at(name);
    cell->weights = matrix_from(c.at("weights"), 4 * h, d + h, fmt::format("{}.weights", name));
    cell->bias = vector_from(c.at("bias"), 4 * h, fmt::format("{}.bias", name));
  }
  return p;
}

json head_json(const std::string& task, const HeadParams& h) {
  json j;
  j["task"] = task;
  j["weights"] = vector_json(h.weights);
  j["bias"] = h.bias;
  return j;
}

HeadParams head_from(const json& j, int hidden) {
  return {vector_from(j.at("weights"), 2 * hidden, "head.weights"), j.at("bias").get<double>()};
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json j;
  j["format"] = "revlab-checkpoint";
  j["version"] = kCheckpointVersion;
  j["regime"] = ckpt.regime;
  j["config"] = json::parse(ckpt.config.to_json());
  j["config_hash"] = ckpt.config_hash();
  if (const auto* stl = std::get_if<StlModel>(&ckpt.model)) {
    j["kind"] = "single";
    j["encoder"] = lstm_json(stl->lstm);
    j["heads"] = json::array({head_json(stl->task, stl->head)});
  } else {
    const auto& mtl = std::get<MtlModel>(ckpt.model);
    j["kind"] = "multi";
    j["encoder"] = lstm_json(mtl.shared);
    json heads = json::array();
    for (const auto& [task, h] : mtl.heads) heads.push_back(head_json(task, h));
    j["heads"] = std::move(heads);
  }
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "revlab-checkpoint") throw ValidationError("not a revlab checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ValidationError(fmt::format("unsupported checkpoint version {}", j.at("version").dump()));
    Checkpoint c;
    c.regime = j.at("regime").get<std::string>();
    c.config = TrainConfig::from_json(j.at("config").dump());
    if (j.at("config_hash").get<std::string>() != c.config_hash())
      throw ValidationError("checkpoint config hash does not match its config");
    auto lstm = lstm_from(j.at("encoder"));
    const int h = lstm.hidden_dim;
    const auto& heads = j.at("heads");
    if (!heads.is_array() || heads.empty()) throw ValidationError("checkpoint has no heads");
    if (j.at("kind") == "single") {
      if (heads.size() != 1) throw ValidationError("single-head checkpoint with several heads");
      c.model = StlModel{heads[0].at("task").get<std::string>(), std::move(lstm), head_from(heads[0], h)};
    } else if (j.at("kind") == "multi") {
      MtlModel m;
      m.shared = std::move(lstm);
      for (const auto& hj : heads) m.heads.emplace_back(hj.at("task").get<std::string>(), head_from(hj, h));
      c.model = std::move(m);
    } else {
      throw ValidationError("unknown checkpoint kind");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write checkpoint {}", path.string()));
  out << serialize_checkpoint(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open checkpoint {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

bool same_parameters(const Checkpoint& a, const Checkpoint& b) {
  auto view = [](const Checkpoint& c) {
    std::pair<const BiLstmParams*, std::vector<const HeadParams*>> v;
    if (const auto* s = std::get_if<StlModel>(&c.model)) {
      v.first = &s->lstm;
      v.second.push_back(&s->head);
    } else {
      const auto& m = std::get<MtlModel>(c.model);
      v.first = &m.shared;
      for (const auto& [t, h] : m.heads) v.second.push_back(&h);
    }
    return v;
  };
  const auto va = view(a), vb = view(b);
  if (!(*va.first == *vb.first) || va.second.size() != vb.second.size()) return false;
  for (std::size_t i = 0; i < va.second.size(); ++i)
    if (!(*va.second[i] == *vb.second[i])) return false;
  return true;
}

}  // namespace revlab::regimes
