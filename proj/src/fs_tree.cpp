#include "evoagent/fs_tree.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace evoagent {

std::string normalize_rel_path(const std::string& path) {
    if (path.empty())
        throw MalformedPathError("empty path");
    if (path.front() == '/' || path.front() == '\\')
        throw MalformedPathError("absolute path: " + path);
    if (path.size() >= 2 && std::isalpha(static_cast<unsigned char>(path[0])) && path[1] == ':')
        throw MalformedPathError("absolute path: " + path);
    if (path.find('\\') != std::string::npos)
        throw MalformedPathError("backslash in path: " + path);

    std::vector<std::string> parts;
    std::string seg;
    std::istringstream in(path);
    while (std::getline(in, seg, '/')) {
        if (seg.empty() || seg == ".")
            continue;
        if (seg == "..")
            throw MalformedPathError("path escapes root: " + path);
        parts.push_back(seg);
    }
    if (parts.empty())
        throw MalformedPathError("empty path: " + path);
    return join(parts, "/");
}

bool is_malformed_path(const std::string& path) {
    try {
        normalize_rel_path(path);
        return false;
    } catch (const MalformedPathError&) {
        return true;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

FileTree read_tree(const std::string& root_dir) {
    FileTree tree;
    fs::path root(root_dir);
    if (!fs::is_directory(root))
        throw std::runtime_error("not a directory: " + root_dir);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file())
            continue;
        std::string rel = fs::relative(entry.path(), root).generic_string();
        tree[normalize_rel_path(rel)] = read_file(entry.path().string());
    }
    return tree;
}

void write_tree(const std::string& root_dir, const FileTree& tree) {
    fs::create_directories(root_dir);
    for (const auto& [rel, content] : tree)
        write_file((fs::path(root_dir) / rel).string(), content);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r')
                cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty())
        lines.push_back(std::move(cur));
    return lines;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace evoagent
