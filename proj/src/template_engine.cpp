#include "evoagent/template_engine.hpp"

#include "evoagent/fs_tree.hpp"

#include <sstream>
#include <vector>

namespace evoagent {

namespace {

struct Frame {
    std::string name;
    bool active;
};

std::string render_impl(const std::string& text, const TemplateVars* vars, bool check_only) {
    std::string out;
    std::vector<Frame> stack;
    auto active = [&] {
        for (const auto& f : stack)
            if (!f.active)
                return false;
        return true;
    };

    size_t i = 0;
    while (i < text.size()) {
        size_t open = text.find("{{", i);
        if (open == std::string::npos) {
            if (active())
                out.append(text, i, text.size() - i);
            break;
        }
        if (active())
            out.append(text, i, open - i);
        size_t close = text.find("}}", open + 2);
        if (close == std::string::npos)
            throw TemplateError("unclosed '{{' delimiter");
        std::string inner = text.substr(open + 2, close - open - 2);
        i = close + 2;

        std::string token = trim(inner);
        if (token.empty())
            throw TemplateError("empty template slot");
        if (token[0] == '#') {
            std::string name = trim(token.substr(1));
            if (name.empty())
                throw TemplateError("empty section name");
            bool on = false;
            if (!check_only && active()) {
                auto it = vars->find(name);
                on = it != vars->end() && !it->second.empty();
            }
            stack.push_back({name, on});
        } else if (token[0] == '/') {
            std::string name = trim(token.substr(1));
            if (stack.empty() || stack.back().name != name)
                throw TemplateError("mismatched section close: " + name);
            stack.pop_back();
        } else {
            if (!check_only && active()) {
                auto it = vars->find(token);
                if (it == vars->end())
                    throw TemplateError("unresolved template slot: " + token);
                out += it->second;
            }
        }
    }
    if (!stack.empty())
        throw TemplateError("unclosed section: " + stack.back().name);
    return out;
}

}  // namespace

std::string render_template(const std::string& text, const TemplateVars& vars) {
    return render_impl(text, &vars, false);
}

std::optional<std::string> check_template(const std::string& text) {
    try {
        render_impl(text, nullptr, true);
        return std::nullopt;
    } catch (const TemplateError& e) {
        return std::string(e.what());
    }
}

}  // namespace evoagent
