// Client-side graph mirror: a snapshot of entity dumps plus the edge list,
// kept current by applying stream events. The dashboard holds no state of
// its own; reloading the snapshot and replaying the stream must render
// identically.

import {
    ChangeEventDoc,
    EdgeDoc,
    EntityDump,
    GalleryItem,
    StreamEventDoc,
    WidgetBinding,
    WidgetRole,
} from "./types.js";

const ROLE_BY_KIND: Array<[string, WidgetRole]> = [
    ["GalleryEntity", "gallery"],
    ["GraphEntity", "plot"],
    ["StatusEntity", "status"],
    ["LogEntity", "log"],
    ["CodeEditorEntity", "code-editor"],
    ["InputEntity", "input"],
    ["ButtonEntity", "button"],
];

export type AppliedChange =
    | { kind: "property"; entity: string; prop: string }
    | { kind: "structural" }
    | { kind: "none" };

export class GraphModel {
    entities = new Map<string, EntityDump>();
    edges: EdgeDoc[] = [];

    constructor(entities: EntityDump[], edges: EdgeDoc[]) {
        for (const dump of entities) {
            this.entities.set(dump.name, dump);
        }
        this.edges = edges.slice();
    }

    value(entity: string, prop: string): unknown {
        return this.entities.get(entity)?.properties[prop]?.value ?? null;
    }

    version(entity: string, prop: string): number {
        return this.entities.get(entity)?.properties[prop]?.version ?? 0;
    }

    // Stream application is idempotent: replayed or reordered events with a
    // stale version never regress the mirror.
    apply(event: StreamEventDoc): AppliedChange {
        if (event.kind === "property_changed" && event.payload) {
            const change = event.payload as unknown as ChangeEventDoc;
            const entity = this.entities.get(change.entity);
            if (!entity) {
                return { kind: "none" };
            }
            const prop = entity.properties[change.prop];
            if (!prop || change.version > prop.version) {
                entity.properties[change.prop] = {
                    type: prop?.type ?? "any",
                    value: change.new,
                    version: change.version,
                };
                return { kind: "property", entity: change.entity, prop: change.prop };
            }
            return { kind: "none" };
        }
        if (event.kind === "graph_changed" && event.payload) {
            const op = event.payload.op as string;
            if (op === "entity_created") {
                const dump = event.payload.entity as EntityDump;
                this.entities.set(dump.name, dump);
            } else if (op === "entity_removed") {
                const name = event.payload.name as string;
                this.entities.delete(name);
                this.edges = this.edges.filter((e) => e.from !== name && e.to !== name);
            } else if (op === "edge_added") {
                this.edges.push({
                    from: event.payload.from as string,
                    to: event.payload.to as string,
                    label: event.payload.label as string,
                });
            } else if (op === "edge_removed") {
                const { from, to, label } = event.payload as Record<string, string>;
                const index = this.edges.findIndex(
                    (e) => e.from === from && e.to === to && e.label === label,
                );
                if (index >= 0) {
                    this.edges.splice(index, 1);
                }
            }
            return { kind: "structural" };
        }
        return { kind: "none" };
    }

    // The Dashboard finds widget entities on the graph: anything whose kind
    // chain reaches a display, input or button kind. Unknown display kinds
    // degrade to a property inspector instead of failing.
    discoverWidgets(): WidgetBinding[] {
        const out: WidgetBinding[] = [];
        for (const dump of this.entities.values()) {
            const chain = dump.chain ?? [];
            if (!chain.some((k) =>
                k === "DisplayEntity" || k === "InputEntity" || k === "ButtonEntity")) {
                continue;
            }
            let role: WidgetRole = "inspector";
            for (const [kind, candidate] of ROLE_BY_KIND) {
                if (chain.includes(kind)) {
                    role = candidate;
                    break;
                }
            }
            const watched = [];
            const setsTargets = [];
            let messageTarget: string | null = null;
            for (const edge of this.edges) {
                if (edge.from !== dump.name) {
                    continue;
                }
                if (edge.label.startsWith("watches ")) {
                    watched.push({ entity: edge.to, prop: edge.label.slice("watches ".length) });
                } else if (edge.label.startsWith("sets ")) {
                    setsTargets.push({ entity: edge.to, prop: edge.label.slice("sets ".length) });
                } else if (edge.label === "messages" && messageTarget === null) {
                    messageTarget = edge.to;
                }
            }
            const str = (prop: string): string | null => {
                const value = dump.properties[prop]?.value;
                return typeof value === "string" ? value : null;
            };
            out.push({
                name: dump.name,
                kind: chain[0] ?? "Entity",
                role,
                watched,
                setsTargets,
                messageTarget,
                verb: str("message") ?? "play",
                label: str("label") ?? dump.name,
                style: { background: str("background"), border: str("border") },
            });
        }
        return out;
    }

    // Widgets whose rendering depends on (entity, prop): watchers of it,
    // plus the widget itself when one of its own properties changed.
    affectedWidgets(bindings: WidgetBinding[], entity: string, prop: string): WidgetBinding[] {
        return bindings.filter((b) =>
            b.name === entity ||
            b.watched.some((w) => w.entity === entity && w.prop === prop));
    }

    watchedValue(binding: WidgetBinding): unknown {
        const first = binding.watched[0];
        return first ? this.value(first.entity, first.prop) : null;
    }
}

// -- value views -----------------------------------------------------------------

export function galleryItems(value: unknown): GalleryItem[] {
    if (!Array.isArray(value)) {
        return [];
    }
    return value.map((raw) => {
        const item = (raw ?? {}) as Record<string, unknown>;
        const src = item.src as unknown;
        return {
            src: typeof src === "string" ? src
                : (src as Record<string, string> | undefined)?.link ?? "",
            label: typeof item.label === "string" ? item.label : "",
            positive: item.positive === true,
        };
    });
}

export function toggledGallery(value: unknown, index: number): unknown[] {
    if (!Array.isArray(value)) {
        throw new Error("gallery value is not an array");
    }
    return value.map((raw, i) => {
        if (i !== index) {
            return raw;
        }
        const item = { ...(raw as Record<string, unknown>) };
        item.positive = item.positive !== true;
        return item;
    });
}

export function plotSeries(value: unknown): number[] {
    if (!Array.isArray(value)) {
        return [];
    }
    return value.filter((x): x is number => typeof x === "number");
}

export function logLines(value: unknown): string[] {
    if (!Array.isArray(value)) {
        return [];
    }
    return value.map((x) => (typeof x === "string" ? x : JSON.stringify(x)));
}
