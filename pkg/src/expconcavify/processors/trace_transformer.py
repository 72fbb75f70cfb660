from slugify import slugify

BOUND_SLACK = 1e-6


class Transformer:
    @staticmethod
    def generate_slug(text: str) -> str:
        return slugify(text, lowercase=True)

    def cell_slug(self, cell):
        # order prefix keeps slugs unique and sorted like the grid
        return f"{cell.order:03d}-{self.generate_slug(cell.title)}"

    def prepare_manifest_payload(self, cell, trace, path):
        return {
            "order": cell.order,
            "eta": cell.eta,
            "p": cell.p,
            "setting": cell.setting,
            "substitution": cell.substitution,
            "N": trace.expert_count,
            "T": cell.T,
            "seed": cell.seed,
            "path": path,
            "cumulative_loss": trace.cumulative_loss,
            "final_regret": trace.final_regret,
            "bound": trace.bound,
            "bound_ok": trace.final_regret <= trace.bound + BOUND_SLACK,
            "status": "ok",
        }

    def prepare_failure_payload(self, cell, expert_count, error):
        return {
            "order": cell.order,
            "eta": cell.eta,
            "p": cell.p,
            "setting": cell.setting,
            "substitution": cell.substitution,
            "N": expert_count,
            "T": cell.T,
            "seed": cell.seed,
            "status": "failed",
            "error": str(error),
        }
