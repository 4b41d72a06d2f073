#pragma once

#include "scarline/volume.hpp"

#include <string>
#include <variant>

namespace scarline {

using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

/// Volumes are stored as a UTF-8 "<name>.hdr" sidecar next to a raw
/// little-endian payload (x-fastest). Header keys: dims, spacing, origin,
/// dtype (f32 scalar / u16 labels), payload (relative path), and optional
/// label.<id>=<name> entries.
AnyVolume read_volume(const std::string& hdr_path);

ScalarVolume read_scalar_volume(const std::string& hdr_path);
LabelVolume read_label_volume(const std::string& hdr_path);

void write_volume(const std::string& hdr_path, const ScalarVolume& v);
void write_volume(const std::string& hdr_path, const LabelVolume& v);

/// Generic "key: value" text parser shared by the sidecar and config readers.
/// Accepts both ':' and '=' separators; '#' starts a comment; keeps the first
/// separator only. Order of duplicate keys: last one wins.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path);

} // namespace scarline
