#pragma once

#include <functional>
#include <string>
#include <utility>

#include "promptforge/error.hpp"
#include "promptforge/gateway.hpp"
#include "promptforge/prompts.hpp"

namespace promptforge {

// Prompt builders for one critique-then-revise loop. `critique` receives the
// encoded current state; `revise` receives it together with the critique.
struct CritiqueRevise {
    BackendRole role;
    std::string system;
    std::string tag;  // calls are tagged "<tag>.critique" / "<tag>.revise"
    std::function<std::string(const std::string& current)> critique;
    std::function<std::string(const std::string& current, const std::string& critique)> revise;
};

template <typename State>
struct Improved {
    State state;
    int rounds = 0;  // rounds that ran a revise call
};

// Feeds the encoded state back to the model for critique, then asks for a
// revision, `rounds` times. A critique starting with the token "OK" ends the
// loop early. Any failure inside round r surfaces as ImprovementFailed(r).
template <typename State, typename Encode, typename Decode>
Improved<State> critique_and_revise(Gateway& gateway, const CritiqueRevise& spec, State state, int rounds,
                                    Encode&& encode, Decode&& decode) {
    int executed = 0;
    for (int round = 1; round <= rounds; ++round) {
        try {
            std::string current = encode(state);
            std::string critique =
                gateway.ask(spec.role, spec.system, spec.critique(current), spec.tag + ".critique");
            if (prompts::critique_accepts(critique)) break;
            std::string revised =
                gateway.ask(spec.role, spec.system, spec.revise(current, critique), spec.tag + ".revise");
            state = decode(revised, std::as_const(state));
        } catch (const ImprovementFailed&) {
            throw;
        } catch (const std::exception& e) {
            throw ImprovementFailed(round, e.what());
        }
        executed = round;
    }
    return {std::move(state), executed};
}

}  // namespace promptforge
