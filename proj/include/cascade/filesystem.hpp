#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace cascade {

/// The host-file seam behind the file VM functions.
class FileSystem {
public:
    virtual ~FileSystem() = default;
    /// False if the path exists, the parent is missing or the host refuses.
    virtual bool create_directory(std::string_view path) = 0;
    virtual bool write_file(std::string_view path, std::string_view data) = 0;
    virtual std::optional<std::string> read_file(std::string_view path) = 0;
    virtual bool exists(std::string_view path) = 0;
};

class HostFileSystem final : public FileSystem {
public:
    bool create_directory(std::string_view path) override;
    bool write_file(std::string_view path, std::string_view data) override;
    std::optional<std::string> read_file(std::string_view path) override;
    bool exists(std::string_view path) override;
};

/// Deterministic in-process tree. "/" always exists.
class InMemoryFileSystem final : public FileSystem {
public:
    bool create_directory(std::string_view path) override;
    bool write_file(std::string_view path, std::string_view data) override;
    std::optional<std::string> read_file(std::string_view path) override;
    bool exists(std::string_view path) override;

    std::size_t directory_count() const { return dirs_.size(); }

private:
    static std::string normalize(std::string_view path);
    bool parent_is_dir(const std::string& path) const;

    std::set<std::string, std::less<>> dirs_{"/"};
    std::map<std::string, std::string, std::less<>> files_;
};

}  // namespace cascade
