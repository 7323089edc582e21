// HTTP client and event stream reader. The stream is ndjson over chunked
// transfer; reconnects resume from the last seen sequence number so a
// dropped connection never loses events.

import { EdgeDoc, EntityDump, StreamEventDoc, WaveSummary } from "./types.js";

export class Api {
    constructor(readonly base: string) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const resp = await fetch(this.base + path, {
            method,
            headers: { "Content-Type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        if (!resp.ok) {
            let detail = `${resp.status}`;
            try {
                const doc = await resp.json();
                detail = `${doc.error}: ${doc.detail}`;
            } catch {
                // non-JSON error body
            }
            throw new Error(`${method} ${path} failed (${detail})`);
        }
        return (await resp.json()) as T;
    }

    getGraph(): Promise<{ entities: unknown[]; edges: EdgeDoc[] }> {
        return this.request("GET", "/graph");
    }

    async getEntities(): Promise<EntityDump[]> {
        const doc = await this.request<{ entities: EntityDump[] }>("GET", "/entities");
        return doc.entities;
    }

    getEntity(name: string): Promise<EntityDump> {
        return this.request("GET", `/entities/${encodeURIComponent(name)}`);
    }

    putProperty(entity: string, prop: string, value: unknown,
                cause = "external-set"): Promise<WaveSummary> {
        const path = `/entities/${encodeURIComponent(entity)}/properties/${encodeURIComponent(prop)}`;
        return this.request("PUT", path, { value, cause });
    }

    message(agent: string, verb: string): Promise<{ status: string; detail: string }> {
        return this.request("POST", `/agents/${encodeURIComponent(agent)}/message`, { verb });
    }
}

// Splits a byte stream into complete lines; carries partial lines across
// chunks. Pure, so the reconnect logic is testable without sockets.
export function makeLineSplitter(): (chunk: string) => string[] {
    let buffer = "";
    return (chunk: string) => {
        buffer += chunk;
        const parts = buffer.split("\n");
        buffer = parts.pop() ?? "";
        return parts.filter((line) => line.length > 0);
    };
}

export type StreamHandle = {
    stop: () => void;
};

export type StreamOptions = {
    onEvent: (event: StreamEventDoc) => void;
    onStatus?: (state: "connected" | "reconnecting") => void;
    since?: number;
    retryMs?: number;
};

export function streamEvents(base: string, options: StreamOptions): StreamHandle {
    let cursor = options.since ?? -1;
    let stopped = false;
    let controller: AbortController | null = null;

    const run = async () => {
        while (!stopped) {
            controller = new AbortController();
            try {
                const resp = await fetch(`${base}/events?since=${cursor}`, {
                    signal: controller.signal,
                });
                if (!resp.ok || resp.body === null) {
                    throw new Error(`stream returned ${resp.status}`);
                }
                options.onStatus?.("connected");
                const reader = resp.body.getReader();
                const decoder = new TextDecoder();
                const splitLines = makeLineSplitter();
                for (;;) {
                    const { done, value } = await reader.read();
                    if (done) {
                        break;
                    }
                    for (const line of splitLines(decoder.decode(value, { stream: true }))) {
                        const event = JSON.parse(line) as StreamEventDoc;
                        if (event.kind === "heartbeat") {
                            continue;
                        }
                        if (typeof event.seq === "number") {
                            cursor = event.seq;
                        }
                        options.onEvent(event);
                    }
                }
            } catch {
                // fall through to reconnect
            }
            if (!stopped) {
                options.onStatus?.("reconnecting");
                await new Promise((resolve) => setTimeout(resolve, options.retryMs ?? 500));
            }
        }
    };
    void run();

    return {
        stop: () => {
            stopped = true;
            controller?.abort();
        },
    };
}
