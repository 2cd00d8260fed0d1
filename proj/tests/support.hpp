// Helpers shared by the test binaries.
#ifndef GAVG_TESTS_SUPPORT_HPP
#define GAVG_TESTS_SUPPORT_HPP

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

namespace gavg_test {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents for every regular file under `root`.
inline std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

/// Empty string when the trees match byte for byte, else the first difference.
inline std::string compare_trees(const fs::path& a, const fs::path& b) {
  const auto ta = snapshot_tree(a), tb = snapshot_tree(b);
  for (const auto& [name, body] : ta) {
    auto it = tb.find(name);
    if (it == tb.end()) return "missing in second tree: " + name;
    if (it->second != body) return "contents differ: " + name;
  }
  for (const auto& [name, _] : tb)
    if (!ta.count(name)) return "missing in first tree: " + name;
  return {};
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gavg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace gavg_test

#endif  // GAVG_TESTS_SUPPORT_HPP
