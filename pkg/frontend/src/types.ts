// Wire types for the graph server API.

export type PropertyDump = {
    type: string;
    value: unknown;
    version: number;
};

export type EntityDump = {
    name: string;
    kind: string | null;
    chain: string[];
    properties: { [prop: string]: PropertyDump };
};

export type EdgeDoc = {
    from: string;
    to: string;
    label: string;
};

export type ChangeEventDoc = {
    seq: number;
    wave: number;
    entity: string;
    prop: string;
    old: unknown;
    new: unknown;
    version: number;
    cause: string;
};

export type StreamEventDoc = {
    seq?: number;
    kind: "property_changed" | "graph_changed" | "agent_status" | "heartbeat";
    payload?: Record<string, unknown>;
};

export type WaveSummary = {
    wave: number;
    status: string;
    events: number;
    triggers: string[];
    detail: string;
};

export type CodeValue = {
    language: string;
    entrypoint: string;
    text: string;
};

export type GalleryItem = {
    src: string;
    label: string;
    positive: boolean;
};

export type WidgetRole =
    | "gallery"
    | "plot"
    | "status"
    | "log"
    | "input"
    | "button"
    | "code-editor"
    | "inspector";

export type WidgetBinding = {
    name: string;
    kind: string;           // most-derived kind in the chain
    role: WidgetRole;
    watched: Array<{ entity: string; prop: string }>;
    setsTargets: Array<{ entity: string; prop: string }>;
    messageTarget: string | null;
    verb: string;
    label: string;
    style: { background: string | null; border: string | null };
};
