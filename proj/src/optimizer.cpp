#include "promptforge/optimizer.hpp"

namespace promptforge {

PipelineOutcome run_pipeline(const Dataset& dataset, const PipelineParams& params, const OptimizerContext& ctx,
                             const std::optional<std::filesystem::path>& run_dir, Phase stop_after) {
    PipelineOutcome out;
    if (run_dir) {
        auto rp = resume(*run_dir);
        out.resumed_from = rp.phase;
        out.completed = rp.phase;
        out.features = std::move(rp.features);
        out.candidates = std::move(rp.candidates);
        out.refined = std::move(rp.refined);
        if (out.features && !(out.features->dimensions == params.schema))
            throw ConfigMismatch("features.json was extracted with a different schema");
    }
    auto reached = [&](Phase p) { return static_cast<int>(p) >= static_cast<int>(stop_after); };

    if (!out.features) {
        ExtractionOptions opts{ctx.roles.extractor, params.extraction_rounds, ctx.parallelism};
        out.features = with_context("extraction", [&] { return extract_all(dataset, params.schema, ctx.gw(), opts); });
        if (run_dir) save_checkpoint(*run_dir, *out.features);
        out.completed = Phase::features;
    }
    if (reached(Phase::features)) return out;

    if (!out.candidates) {
        auto gen = with_context("generation",
                                [&] { return generate_candidates(*out.features, params.generation, dataset, ctx); });
        out.candidates = CandidatesArtifact{gen.candidates, gen.best};
        if (run_dir) {
            for (std::size_t i = 0; i < gen.reports.size(); ++i)
                save_evaluation(*run_dir, "candidate_t" + std::to_string(gen.candidates[i].batch_index), gen.reports[i]);
            save_checkpoint(*run_dir, *out.candidates);
        }
        out.completed = Phase::candidates;
    }
    if (reached(Phase::candidates)) return out;

    if (!out.refined) {
        const auto& best = out.candidates->candidates.at(out.candidates->best);
        auto refined = with_context(
            "refinement", [&] { return refine(best, dataset, params.schema, params.refinement, ctx); });
        out.refined = RefinedArtifact{{refined.state, refined.score, best.score, best.batch_index}, refined.trace};
        if (run_dir) {
            save_evaluation(*run_dir, "optimized",
                            evaluate_prompt(refined.state, dataset, ctx.gw(), ctx.roles.agent, ctx.metric,
                                            ctx.parallelism));
            save_checkpoint(*run_dir, *out.refined);
        }
        out.completed = Phase::refined;
    }
    return out;
}

}  // namespace promptforge
