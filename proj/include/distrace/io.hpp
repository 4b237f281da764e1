#pragma once

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <string>
#include <vector>

namespace distrace {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Parses one JSON object per nonblank line. The callback receives the
/// 1-based line number and the parsed object. Parse failures throw with
/// the line number in the message.
void for_each_jsonl(const std::string& path,
                    const std::function<void(size_t, const nlohmann::json&)>& fn);

/// Serializes one object per line (compact, keys sorted by nlohmann's
/// std::map ordering, so output is byte-stable).
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records);

}  // namespace distrace
