"""Heterogeneous graph model for shift prediction.

Three node types (employee, day, shift) and three bidirectional relations
(shift-employee, shift-day, shift-shift across consecutive days), each
direction carrying its own multi-head attention parameters.  After the
message-passing rounds every shift embedding is concatenated with its
employee and day embeddings and an MLP head emits four class logits per
(employee, day) cell.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import ModelConfig

FEATURE_DIM = 17
NUM_CLASSES = 4

# (name, source node type, destination node type)
RELATIONS = (
    ("shift_to_employee", "shift", "employee"),
    ("employee_to_shift", "employee", "shift"),
    ("shift_to_day", "shift", "day"),
    ("day_to_shift", "day", "shift"),
    ("shift_next", "shift", "shift"),
    ("shift_prev", "shift", "shift"),
)

NODE_TYPES = ("employee", "day", "shift")


class GraphBatch:
    """Concatenated node features and typed edge indices for a batch."""

    def __init__(self, graphs: list[dict], metas: list[dict]):
        if len(graphs) != len(metas):
            raise ValueError("graphs and metas length mismatch")
        emp, day, shift = [], [], []
        edges = {name: [] for name, _, _ in RELATIONS}
        self.graph_slices = []  # (E, D, shift node offset) per graph
        off = {"employee": 0, "day": 0, "shift": 0}
        for graph, meta in zip(graphs, metas):
            E, D = int(meta["employees"]), int(meta["days"])
            if int(meta.get("feature_dim", FEATURE_DIM)) != FEATURE_DIM:
                raise ValueError(
                    f"feature_dim {meta.get('feature_dim')} != {FEATURE_DIM}"
                )
            ef = torch.tensor(graph["employee_feats"], dtype=torch.float32)
            df = torch.tensor(graph["day_feats"], dtype=torch.float32)
            sf = torch.tensor(graph["shift_feats"], dtype=torch.float32)
            if ef.shape != (E, FEATURE_DIM) or df.shape != (D, FEATURE_DIM):
                raise ValueError("employee/day feature shapes do not match meta")
            if sf.shape != (E * D, FEATURE_DIM):
                raise ValueError("shift feature shape does not match meta")
            emp.append(ef)
            day.append(df)
            shift.append(sf)

            def split(pairs, n_forward):
                arr = torch.tensor(pairs, dtype=torch.long)
                if arr.numel() == 0:
                    empty = torch.zeros((0, 2), dtype=torch.long)
                    return empty, empty
                if len(arr) != 2 * n_forward:
                    raise ValueError("edge list does not hold both directions")
                return arr[:n_forward], arr[n_forward:]

            se_fwd, se_rev = split(graph["edges_se"], E * D)
            sd_fwd, sd_rev = split(graph["edges_sd"], E * D)
            ss_fwd, ss_rev = split(graph["edges_ss"], E * (D - 1))
            o_s, o_e, o_d = off["shift"], off["employee"], off["day"]
            edges["shift_to_employee"].append(se_fwd + torch.tensor([o_s, o_e]))
            edges["employee_to_shift"].append(se_rev + torch.tensor([o_e, o_s]))
            edges["shift_to_day"].append(sd_fwd + torch.tensor([o_s, o_d]))
            edges["day_to_shift"].append(sd_rev + torch.tensor([o_d, o_s]))
            if len(ss_fwd):
                edges["shift_next"].append(ss_fwd + o_s)
                edges["shift_prev"].append(ss_rev + o_s)
            self.graph_slices.append((E, D, off["shift"]))
            off["employee"] += E
            off["day"] += D
            off["shift"] += E * D

        self.features = {
            "employee": torch.cat(emp),
            "day": torch.cat(day),
            "shift": torch.cat(shift),
        }
        self.counts = dict(off)
        self.edges = {}
        for name, _, _ in RELATIONS:
            if edges[name]:
                self.edges[name] = torch.cat(edges[name]).t().contiguous()
            else:
                self.edges[name] = torch.zeros((2, 0), dtype=torch.long)


class RelationAttention(nn.Module):
    """Multi-head dot-product attention along one directed relation."""

    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.query = nn.Linear(hidden, hidden)
        self.key = nn.Linear(hidden, hidden)
        self.value = nn.Linear(hidden, hidden)

    def forward(self, x_src, x_dst, edge_index, n_dst):
        if edge_index.shape[1] == 0:
            return x_dst.new_zeros(n_dst, self.heads * self.head_dim)
        src, dst = edge_index[0], edge_index[1]
        q = self.query(x_dst)[dst].view(-1, self.heads, self.head_dim)
        k = self.key(x_src)[src].view(-1, self.heads, self.head_dim)
        v = self.value(x_src)[src].view(-1, self.heads, self.head_dim)
        score = (q * k).sum(-1) / math.sqrt(self.head_dim)  # (edges, heads)

        # numerically stable softmax per destination node
        score_max = score.new_full((n_dst, self.heads), float("-inf"))
        score_max = score_max.scatter_reduce(
            0, dst.unsqueeze(1).expand_as(score), score, reduce="amax",
            include_self=True,
        )
        score = (score - score_max[dst]).exp()
        denom = score.new_zeros(n_dst, self.heads).index_add_(0, dst, score)
        alpha = score / denom[dst].clamp_min(1e-12)

        out = v.new_zeros(n_dst, self.heads, self.head_dim)
        out.index_add_(0, dst, v * alpha.unsqueeze(-1))
        return out.view(n_dst, -1)


class HeteroConvLayer(nn.Module):
    """One round of relation-typed message passing with per-type updates."""

    def __init__(self, hidden: int, heads: int, dropout: float):
        super().__init__()
        self.attention = nn.ModuleDict(
            {name: RelationAttention(hidden, heads) for name, _, _ in RELATIONS}
        )
        self.root = nn.ModuleDict(
            {t: nn.Linear(hidden, hidden) for t in NODE_TYPES}
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: dict, batch: GraphBatch) -> dict:
        messages = {t: torch.zeros_like(x[t]) for t in NODE_TYPES}
        for name, src_t, dst_t in RELATIONS:
            messages[dst_t] = messages[dst_t] + self.attention[name](
                x[src_t], x[dst_t], batch.edges[name], x[dst_t].shape[0]
            )
        return {
            t: self.dropout(torch.relu(self.root[t](x[t]) + messages[t]))
            for t in NODE_TYPES
        }


class ShiftPredictor(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        hidden = config.hidden_dim
        self.encoders = nn.ModuleDict(
            {t: nn.Linear(FEATURE_DIM, hidden) for t in NODE_TYPES}
        )
        self.layers = nn.ModuleList(
            HeteroConvLayer(hidden, config.nb_heads, config.dropout_conv)
            for _ in range(config.nb_layers_conv)
        )
        mlp: list[nn.Module] = []
        dim = 3 * hidden
        for k in range(config.nb_layers_mlp - 1):
            mlp += [nn.Linear(dim, hidden), nn.ReLU(), nn.Dropout(config.dropout_mlp)]
            dim = hidden
        mlp.append(nn.Linear(dim, NUM_CLASSES))
        self.head = nn.Sequential(*mlp)

    def logits(self, batch: GraphBatch) -> torch.Tensor:
        """(total shift nodes, 4) class logits."""
        x = {t: torch.relu(self.encoders[t](batch.features[t])) for t in NODE_TYPES}
        for layer in self.layers:
            x = layer(x, batch)
        emp_idx = []
        day_idx = []
        emp_off = 0
        day_off = 0
        for E, D, _ in batch.graph_slices:
            grid_e = torch.arange(E).repeat_interleave(D) + emp_off
            grid_d = torch.arange(D).repeat(E) + day_off
            emp_idx.append(grid_e)
            day_idx.append(grid_d)
            emp_off += E
            day_off += D
        emp_idx = torch.cat(emp_idx)
        day_idx = torch.cat(day_idx)
        combined = torch.cat(
            [x["shift"], x["employee"][emp_idx], x["day"][day_idx]], dim=1
        )
        return self.head(combined)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        """(total shift nodes, 4) class probabilities."""
        return torch.softmax(self.logits(batch), dim=1)

    def predict_schedules(self, batch: GraphBatch) -> list[list[list[int]]]:
        """Argmax codes reshaped to one (E, D) matrix per graph."""
        with torch.no_grad():
            codes = self.logits(batch).argmax(dim=1)
        out = []
        for E, D, off in batch.graph_slices:
            out.append(codes[off : off + E * D].view(E, D).tolist())
        return out


def save_checkpoint(model: ShiftPredictor, path) -> None:
    torch.save(
        {
            "protocol": 1,
            "feature_dim": FEATURE_DIM,
            "config": model.config.to_dict(),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> ShiftPredictor:
    data = torch.load(path, map_location="cpu", weights_only=False)
    if data.get("protocol") != 1 or data.get("feature_dim") != FEATURE_DIM:
        raise ValueError("checkpoint does not speak protocol v1")
    model = ShiftPredictor(ModelConfig.from_dict(data["config"]))
    model.load_state_dict(data["state_dict"])
    model.eval()
    return model
