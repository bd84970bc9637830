#include "tasr/prompts.hpp"

#include <mutex>
#include <unordered_map>

#include "tasr/error.hpp"
#include "tasr/types.hpp"

namespace tasr {

namespace detail {
struct PromptAsset {
    std::string_view name;
    std::string_view content;
};
// Defined in the generated prompt_assets.cpp.
extern const PromptAsset kPromptAssets[];
extern const std::size_t kPromptAssetCount;
}  // namespace detail

namespace {

const std::unordered_map<std::string, PromptTemplate>& registry() {
    static const auto table = [] {
        std::unordered_map<std::string, PromptTemplate> t;
        for (std::size_t i = 0; i < detail::kPromptAssetCount; ++i) {
            const auto& asset = detail::kPromptAssets[i];
            std::string content(asset.content);
            auto sep = content.find("\n---\n");
            if (sep == std::string::npos) {
                t.emplace(std::string(asset.name), PromptTemplate{"", trim(content)});
            } else {
                t.emplace(std::string(asset.name),
                          PromptTemplate{trim(content.substr(0, sep)), trim(content.substr(sep + 5))});
            }
        }
        return t;
    }();
    return table;
}

}  // namespace

const PromptTemplate& prompt_template(std::string_view name) {
    const auto& table = registry();
    auto it = table.find(std::string(name));
    if (it == table.end()) throw Error(ErrorKind::ParseError, "unknown prompt asset '" + std::string(name) + "'");
    return it->second;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        std::string key(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it == vars.end()) throw Error(ErrorKind::ParseError, "prompt placeholder {{" + key + "}} has no value");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

LlmRequest build_request(RoleTag role, std::string_view asset,
                         const std::map<std::string, std::string>& vars) {
    const auto& t = prompt_template(asset);
    LlmRequest req;
    req.role = role;
    req.system_prompt = t.system;
    req.user_prompt = render_template(t.user, vars);
    return req;
}

}  // namespace tasr
