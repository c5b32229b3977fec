#include "fedm/protocol.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fedm {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void schema_error(const std::string& what) {
  throw ProtocolError(ProtocolError::Fault::schema, what);
}

double finite(double x, const char* field) {
  if (!std::isfinite(x)) {
    throw ProtocolError(ProtocolError::Fault::non_finite,
                        std::string("non-finite value in field '") + field + "'");
  }
  return x;
}

Json vector_json(const Vector& v, const char* field) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(finite(v(i), field));
  return out;
}

Json matrix_json(const Matrix& m, const char* field) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose(), field));
  return out;
}

double number(const Json& j, const char* field) {
  if (j.is_null()) {
    throw ProtocolError(ProtocolError::Fault::non_finite,
                        std::string("null (non-finite) value in field '") + field + "'");
  }
  if (!j.is_number()) schema_error(std::string("field '") + field + "' must hold numbers");
  return finite(j.get<double>(), field);
}

Vector vector_from(const Json& j, const char* field) {
  if (!j.is_array()) schema_error(std::string("field '") + field + "' must be an array");
  Vector out(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Index>(i)) = number(j[i], field);
  return out;
}

Matrix matrix_from(const Json& j, const char* field) {
  if (!j.is_array()) schema_error(std::string("field '") + field + "' must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  Index cols = rows > 0 && j[0].is_array() ? static_cast<Index>(j[0].size()) : 0;
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Vector row = vector_from(j[static_cast<std::size_t>(r)], field);
    if (row.size() != cols) schema_error(std::string("field '") + field + "' has ragged rows");
    out.row(r) = row.transpose();
  }
  return out;
}

Index count_from(const Json& j, const char* field) {
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    schema_error(std::string("field '") + field + "' must be a positive integer");
  }
  return static_cast<Index>(j.get<long long>());
}

std::string string_from(const Json& j, const char* field) {
  if (!j.is_string()) schema_error(std::string("field '") + field + "' must be a string");
  return j.get<std::string>();
}

Json parse_object(std::string_view text, const std::set<std::string>& fields, const char* kind) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::out_of_range& e) {
    throw ProtocolError(ProtocolError::Fault::non_finite,
                        std::string(kind) + ": number out of range: " + e.what());
  } catch (const nlohmann::json::exception& e) {
    schema_error(std::string(kind) + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) schema_error(std::string(kind) + ": top level must be an object");
  if (!j.contains("protocol_version")) schema_error(std::string(kind) + ": missing protocol_version");
  const auto version = string_from(j["protocol_version"], "protocol_version");
  if (version != protocol_version) {
    throw ProtocolError(ProtocolError::Fault::version,
                        std::string(kind) + ": protocol version " + version +
                            " is not supported (expected " + std::string(protocol_version) + ")");
  }
  for (const auto& [key, value] : j.items()) {
    if (!fields.contains(key)) schema_error(std::string(kind) + ": unexpected field '" + key + "'");
  }
  for (const auto& f : fields) {
    if (!j.contains(f)) schema_error(std::string(kind) + ": missing field '" + f + "'");
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ProtocolError(ProtocolError::Fault::io, "cannot write " + path.string());
  out << text;
  if (!out) throw ProtocolError(ProtocolError::Fault::io, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProtocolError(ProtocolError::Fault::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json estimate_json(const Estimate& e, std::span<const std::string> sites) {
  Json out;
  out["theta"] = vector_json(e.theta, "theta");
  out["variance"] = matrix_json(e.variance, "variance");
  Json ci = Json::array();
  for (const auto& iv : e.ci) ci.push_back(Json::array({finite(iv.lo, "ci"), finite(iv.hi, "ci")}));
  out["ci"] = std::move(ci);
  if (!e.lambdas.empty()) {
    Json lambdas = Json::object();
    for (std::size_t k = 0; k < e.lambdas.size(); ++k) {
      lambdas[sites[k]] = matrix_json(e.lambdas[k], "lambdas");
    }
    out["lambdas"] = std::move(lambdas);
  }
  return out;
}

}  // namespace

void check_site_label(std::string_view label) {
  const bool ok = !label.empty() && label.front() != '.' &&
                  std::all_of(label.begin(), label.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                           c == '.';
                  });
  if (!ok) {
    throw ConfigError("site label '" + std::string(label) +
                      "' must be nonempty and use only letters, digits, '_', '-' and '.'");
  }
}

std::string reply_file_name(std::string_view site) {
  return "reply_" + std::string(site) + ".json";
}

std::string encode_broadcast(const TargetSummary& target) {
  const Index d = target.dim();
  if (target.a_hat.rows() != d || target.a_hat.cols() != d || target.sigma_s_hat.rows() != d ||
      target.sigma_s_hat.cols() != d || target.broadcast_draws.cols() != d) {
    schema_error("broadcast: inconsistent dimensions");
  }
  Json j;
  j["protocol_version"] = protocol_version;
  j["target_label"] = target.label;
  j["n_target"] = static_cast<long long>(target.n_target);
  j["theta_hat"] = vector_json(target.theta_hat, "theta_hat");
  j["broadcast_draws"] = matrix_json(target.broadcast_draws, "broadcast_draws");
  j["a_hat"] = matrix_json(target.a_hat, "a_hat");
  j["sigma_s_hat"] = matrix_json(target.sigma_s_hat, "sigma_s_hat");
  return j.dump(2) + "\n";
}

TargetSummary decode_broadcast(std::string_view json) {
  static const std::set<std::string> fields = {"protocol_version", "target_label", "n_target",
                                               "theta_hat", "broadcast_draws", "a_hat",
                                               "sigma_s_hat"};
  const Json j = parse_object(json, fields, "broadcast");
  TargetSummary out;
  out.label = string_from(j["target_label"], "target_label");
  out.n_target = count_from(j["n_target"], "n_target");
  out.theta_hat = vector_from(j["theta_hat"], "theta_hat");
  out.broadcast_draws = matrix_from(j["broadcast_draws"], "broadcast_draws");
  out.a_hat = matrix_from(j["a_hat"], "a_hat");
  out.sigma_s_hat = matrix_from(j["sigma_s_hat"], "sigma_s_hat");
  const Index d = out.dim();
  if (d < 1 || out.a_hat.rows() != d || out.a_hat.cols() != d || out.sigma_s_hat.rows() != d ||
      out.sigma_s_hat.cols() != d || out.broadcast_draws.rows() < 1 ||
      out.broadcast_draws.cols() != d) {
    schema_error("broadcast: field sizes are inconsistent with d = " + std::to_string(d));
  }
  return out;
}

std::string encode_reply(const ReplyMessage& reply) {
  const auto& s = reply.summary;
  const Index d = s.score.size();
  if (s.a.rows() != d || s.a.cols() != d || s.sigma.rows() != d || s.sigma.cols() != d) {
    schema_error("reply: inconsistent dimensions");
  }
  Json j;
  j["protocol_version"] = protocol_version;
  j["target_label"] = reply.target_label;
  j["site"] = s.site;
  j["n"] = static_cast<long long>(s.n);
  j["score"] = vector_json(s.score, "score");
  j["A"] = matrix_json(s.a, "A");
  j["Sigma"] = matrix_json(s.sigma, "Sigma");
  j["a_is_pd"] = s.a_is_pd;
  return j.dump(2) + "\n";
}

ReplyMessage decode_reply(std::string_view json) {
  static const std::set<std::string> fields = {"protocol_version", "target_label", "site", "n",
                                               "score", "A", "Sigma", "a_is_pd"};
  const Json j = parse_object(json, fields, "reply");
  ReplyMessage out;
  out.target_label = string_from(j["target_label"], "target_label");
  auto& s = out.summary;
  s.site = string_from(j["site"], "site");
  s.n = count_from(j["n"], "n");
  s.score = vector_from(j["score"], "score");
  s.a = matrix_from(j["A"], "A");
  s.sigma = matrix_from(j["Sigma"], "Sigma");
  if (!j["a_is_pd"].is_boolean()) schema_error("reply: field 'a_is_pd' must be a boolean");
  s.a_is_pd = j["a_is_pd"].get<bool>();
  const Index d = s.score.size();
  if (d < 1 || s.a.rows() != d || s.a.cols() != d || s.sigma.rows() != d || s.sigma.cols() != d) {
    schema_error("reply: field sizes are inconsistent with d = " + std::to_string(d));
  }
  return out;
}

std::string encode_combined(const CombinedEstimate& estimate, std::string_view target_label) {
  const auto& diag = estimate.diagnostics;
  Json j;
  j["protocol_version"] = protocol_version;
  j["target_label"] = target_label;
  j["n_target"] = static_cast<long long>(estimate.n_target);
  j["alpha"] = estimate.alpha;
  j["lambda"] = estimate.lambda;
  j["transfer"] = estimate_json(estimate.transfer, diag.sites);
  j["target_only"] = estimate_json(estimate.target_only, diag.sites);
  j["full_borrow"] = estimate_json(estimate.full_borrow, diag.sites);
  j["full_borrow_ridge"] = estimate.full_borrow_ridge;
  j["omega_jitter"] = estimate.omega.jitter;
  Json sites = Json::array();
  for (std::size_t k = 0; k < diag.sites.size(); ++k) {
    const auto& name = diag.sites[k];
    Json s;
    s["site"] = name;
    if (std::isinf(diag.t[k])) {
      s["T"] = "inf";
    } else {
      s["T"] = finite(diag.t[k], "T");
    }
    s["p"] = diag.p[k];
    s["lambda_l1"] = l1_norm(estimate.transfer.lambdas[k]);
    s["excluded_non_pd"] = std::find(diag.excluded_non_pd.begin(), diag.excluded_non_pd.end(),
                                     name) != diag.excluded_non_pd.end();
    s["unusable"] =
        std::find(diag.unusable.begin(), diag.unusable.end(), name) != diag.unusable.end();
    sites.push_back(std::move(s));
  }
  j["sites"] = std::move(sites);
  return j.dump(2) + "\n";
}

void write_broadcast(const std::filesystem::path& path, const TargetSummary& target) {
  write_text(path, encode_broadcast(target));
}

TargetSummary read_broadcast(const std::filesystem::path& path) {
  return decode_broadcast(read_text(path));
}

void write_reply(const std::filesystem::path& path, const ReplyMessage& reply) {
  write_text(path, encode_reply(reply));
}

ReplyMessage read_reply(const std::filesystem::path& path) {
  return decode_reply(read_text(path));
}

void write_combined(const std::filesystem::path& path, const CombinedEstimate& estimate,
                    std::string_view target_label) {
  write_text(path, encode_combined(estimate, target_label));
}

}  // namespace fedm
