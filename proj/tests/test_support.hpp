#pragma once

// Shared helpers for the test binaries: fixture locations and small
// filesystem utilities.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef _WIN32
#include <sys/wait.h>
#endif

namespace fse::testing {

inline std::filesystem::path fixture_dir() { return FSE_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return FSE_GOLDEN_DIR; }
inline std::filesystem::path data_dir() { return FSE_DATA_DIR; }
inline std::string cli_binary() { return FSE_CLI_BIN; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("test fixture missing: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path.string());
  out << content;
}

// Scratch directory for artifacts a test writes and reads back.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fse_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

// Runs a command line, captures its exit status portably.
inline int run_command(const std::string& command) {
  const int status = std::system(command.c_str());
#ifdef _WIN32
  return status;
#else
  if (status == -1) return -1;
  return WEXITSTATUS(status);
#endif
}

}  // namespace fse::testing
