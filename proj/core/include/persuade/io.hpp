#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace persuade {

std::string read_text_file(const std::string& path);

// Writes via a sibling temp file + rename so readers never observe a
// partially written file.
void write_file_atomic(const std::string& path, std::string_view content);

// Calls fn(line_number, line) for every non-empty line; line numbers are
// 1-based. Throws FileUnreadable if the file cannot be opened.
void for_each_line(const std::string& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::string trim(std::string_view text);

void log_warn(const std::string& message);

}  // namespace persuade
