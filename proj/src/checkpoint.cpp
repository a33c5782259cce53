#include "sidewalk/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sidewalk {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "sidewalk-policy";

json vector_to_json(const Eigen::VectorXd& v, Eigen::Index offset, Eigen::Index n) {
  json out = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.push_back(format_hex_double(v(offset + i)));
  }
  return out;
}

void json_to_vector(const json& values, Eigen::VectorXd& v, Eigen::Index offset, Eigen::Index n,
                    const std::string& name) {
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != n) {
    throw MalformedCheckpointError("checkpoint tensor '" + name + "' has the wrong length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    v(offset + i) = parse_hex_double(values[static_cast<std::size_t>(i)].get<std::string>());
  }
}

json architecture_to_json(const PolicyArchitecture& a) {
  return {{"input_dim", a.input_dim},
          {"hidden", a.hidden},
          {"action_dim", a.action_dim},
          {"std_min", format_hex_double(a.std_min)},
          {"std_max", format_hex_double(a.std_max)}};
}

json activation_to_json(const PolicyArchitecture& a) {
  return {{"hidden", "leaky_relu"},
          {"negative_slope", format_hex_double(a.negative_slope)},
          {"normalization", "layer_norm"},
          {"layer_norm_eps", format_hex_double(a.layer_norm_eps)},
          {"mean_head", "tanh"},
          {"std_head", "softplus"}};
}

PolicyArchitecture architecture_from_json(const json& arch, const json& act) {
  PolicyArchitecture a;
  a.input_dim = arch.at("input_dim").get<int>();
  a.hidden = arch.at("hidden").get<std::vector<int>>();
  a.action_dim = arch.at("action_dim").get<int>();
  a.std_min = parse_hex_double(arch.at("std_min").get<std::string>());
  a.std_max = parse_hex_double(arch.at("std_max").get<std::string>());
  if (act.at("hidden").get<std::string>() != "leaky_relu" ||
      act.at("normalization").get<std::string>() != "layer_norm" ||
      act.at("mean_head").get<std::string>() != "tanh" ||
      act.at("std_head").get<std::string>() != "softplus") {
    throw ArchitectureMismatchError("checkpoint uses an unsupported activation configuration");
  }
  a.negative_slope = parse_hex_double(act.at("negative_slope").get<std::string>());
  a.layer_norm_eps = parse_hex_double(act.at("layer_norm_eps").get<std::string>());
  return a;
}

}  // namespace

std::string format_hex_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", value);
  return buf;
}

double parse_hex_double(const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw MalformedCheckpointError("checkpoint: cannot parse number '" + text + "'");
  }
  return v;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const PolicyParams& p = ckpt.params;
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kCheckpointVersion;
  doc["architecture"] = architecture_to_json(p.architecture());
  doc["activation"] = activation_to_json(p.architecture());
  doc["layout"] = "row-major";

  json tensors = json::array();
  for (const auto& t : p.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"values", vector_to_json(p.values(), t.offset, t.rows * t.cols)}});
  }
  doc["parameters"] = std::move(tensors);

  if (ckpt.optimizer) {
    const OptimizerState& o = *ckpt.optimizer;
    doc["optimizer"] = {{"kind", "adamw"},
                        {"step", o.step},
                        {"m", vector_to_json(o.m, 0, o.m.size())},
                        {"v", vector_to_json(o.v, 0, o.v.size())}};
  } else {
    doc["optimizer"] = nullptr;
  }
  doc["metadata"] = {{"episodes", ckpt.metadata.episodes},
                     {"seed", ckpt.metadata.seed},
                     {"risk_averse", ckpt.metadata.risk_averse}};

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError("cannot write checkpoint " + tmp.string());
    }
    out << doc.dump(1) << '\n';
    if (!out) {
      throw CheckpointError("failed while writing checkpoint " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<PolicyArchitecture>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedCheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }

  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw MalformedCheckpointError("not a policy checkpoint: " + path.string());
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
    }
    PolicyArchitecture arch = architecture_from_json(doc.at("architecture"), doc.at("activation"));
    if (expected && !(arch == *expected)) {
      throw ArchitectureMismatchError("checkpoint architecture does not match the configuration");
    }

    Checkpoint ckpt{PolicyParams(arch), std::nullopt, {}};
    const auto tensors = ckpt.params.tensors();
    const json& stored = doc.at("parameters");
    if (!stored.is_array() || stored.size() != tensors.size()) {
      throw MalformedCheckpointError("checkpoint has the wrong number of tensors");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      if (stored[i].at("name").get<std::string>() != t.name) {
        throw MalformedCheckpointError("checkpoint tensor order mismatch at '" + t.name + "'");
      }
      json_to_vector(stored[i].at("values"), ckpt.params.values(), t.offset, t.rows * t.cols,
                     t.name);
    }

    const json& opt = doc.at("optimizer");
    if (!opt.is_null()) {
      OptimizerState o = OptimizerState::zeros(ckpt.params.size());
      o.step = opt.at("step").get<long>();
      json_to_vector(opt.at("m"), o.m, 0, o.m.size(), "optimizer.m");
      json_to_vector(opt.at("v"), o.v, 0, o.v.size(), "optimizer.v");
      ckpt.optimizer = std::move(o);
    }
    const json& meta = doc.at("metadata");
    ckpt.metadata.episodes = meta.at("episodes").get<long>();
    ckpt.metadata.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.metadata.risk_averse = meta.at("risk_averse").get<bool>();
    return ckpt;
  } catch (const json::exception& e) {
    throw MalformedCheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace sidewalk
