#pragma once

#include "fedm/combiner.hpp"
#include "fedm/common.hpp"
#include "fedm/sampler.hpp"
#include "fedm/source_site.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace fedm {

inline constexpr std::string_view protocol_version = "1.0";

/// A source reply together with the target label it answers.
struct ReplyMessage {
  SourceSummary summary;
  std::string target_label;
};

/// Broadcast: theta_hat, broadcast_draws, a_hat, sigma_s_hat, n_target,
/// protocol_version, target_label. Sampler diagnostics are not sent.
std::string encode_broadcast(const TargetSummary& target);
TargetSummary decode_broadcast(std::string_view json);

/// Reply: site, n, score, A, Sigma, a_is_pd, protocol_version, target_label.
/// Any other field is a schema violation.
std::string encode_reply(const ReplyMessage& reply);
ReplyMessage decode_reply(std::string_view json);

/// The combined estimate, the two baselines and per-site diagnostics.
/// An infinite T_k is written as the string "inf".
std::string encode_combined(const CombinedEstimate& estimate, std::string_view target_label);

void write_broadcast(const std::filesystem::path& path, const TargetSummary& target);
TargetSummary read_broadcast(const std::filesystem::path& path);
void write_reply(const std::filesystem::path& path, const ReplyMessage& reply);
ReplyMessage read_reply(const std::filesystem::path& path);
void write_combined(const std::filesystem::path& path, const CombinedEstimate& estimate,
                    std::string_view target_label);

/// `reply_<site>.json`
std::string reply_file_name(std::string_view site);

/// Site labels become file names: nonempty, [A-Za-z0-9_.-] only, no leading dot.
void check_site_label(std::string_view label);

}  // namespace fedm
