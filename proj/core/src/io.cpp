#include "persuade/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "persuade/errors.hpp"

namespace persuade {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::file_unreadable, path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_error, "cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) raise(Errc::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) raise(Errc::io_error, "rename " + tmp.string() + " -> " + path + ": " + ec.message());
}

void for_each_line(const std::string& path,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::file_unreadable, path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fn(line_no, line);
  }
}

std::string trim(std::string_view text) {
  std::size_t begin = 0, end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

void log_warn(const std::string& message) {
  std::cerr << "[warn] " << message << "\n";
}

}  // namespace persuade
