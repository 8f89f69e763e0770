#include "fuselab/fusion_model.hpp"

namespace fuselab {

std::string_view to_string(FusionKind kind) {
    switch (kind) {
        case FusionKind::Basic: return "basic";
        case FusionKind::SelfAttention: return "self-attn";
        case FusionKind::DualAttention: return "dual-attn";
    }
    return "unknown";
}

FusionKind parse_fusion_kind(std::string_view name) {
    for (FusionKind k : kAllFusionKinds)
        if (to_string(k) == name) return k;
    throw InputError("unknown fusion kind '" + std::string(name) +
                     "' (expected basic, self-attn or dual-attn)");
}

}  // namespace fuselab
