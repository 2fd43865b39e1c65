#include "cascade/filesystem.hpp"

#include <fstream>
#include <sstream>
#include <sys/stat.h>

namespace cascade {

bool HostFileSystem::create_directory(std::string_view path) {
    // mkdir(2) directly: fails on existing paths and missing parents.
    return ::mkdir(std::string(path).c_str(), 0755) == 0;
}

bool HostFileSystem::write_file(std::string_view path, std::string_view data) {
    std::ofstream out(std::string(path), std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    return static_cast<bool>(out);
}

std::optional<std::string> HostFileSystem::read_file(std::string_view path) {
    std::ifstream in(std::string(path), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool HostFileSystem::exists(std::string_view path) {
    std::error_code ec;
    return std::filesystem::exists(std::filesystem::path(path), ec);
}

std::string InMemoryFileSystem::normalize(std::string_view path) {
    std::string p(path);
    while (p.size() > 1 && p.back() == '/') p.pop_back();
    return p;
}

bool InMemoryFileSystem::parent_is_dir(const std::string& path) const {
    auto slash = path.rfind('/');
    if (slash == std::string::npos) return false;
    std::string parent = slash == 0 ? "/" : path.substr(0, slash);
    return dirs_.count(parent) != 0;
}

bool InMemoryFileSystem::create_directory(std::string_view path) {
    std::string p = normalize(path);
    if (p.empty() || p[0] != '/' || dirs_.count(p) || files_.count(p) || !parent_is_dir(p)) return false;
    dirs_.insert(p);
    return true;
}

bool InMemoryFileSystem::write_file(std::string_view path, std::string_view data) {
    std::string p = normalize(path);
    if (p.empty() || dirs_.count(p) || !parent_is_dir(p)) return false;
    files_[p] = std::string(data);
    return true;
}

std::optional<std::string> InMemoryFileSystem::read_file(std::string_view path) {
    auto it = files_.find(normalize(path));
    if (it == files_.end()) return std::nullopt;
    return it->second;
}

bool InMemoryFileSystem::exists(std::string_view path) {
    std::string p = normalize(path);
    return dirs_.count(p) || files_.count(p);
}

}  // namespace cascade
