// Boot: snapshot the graph, render every widget entity, then keep the page
// live off one event-stream subscription. property_changed events re-render
// only the affected widgets; structural changes reload the snapshot.

import { Api, streamEvents } from "./api.js";
import { GraphModel } from "./model.js";
import { WidgetBinding } from "./types.js";
import { renderWidget } from "./widgets.js";

const api = new Api("");
let model: GraphModel;
let bindings: WidgetBinding[] = [];
const containers = new Map<string, HTMLElement>();

async function loadModel(): Promise<void> {
    const [entities, graph] = await Promise.all([api.getEntities(), api.getGraph()]);
    model = new GraphModel(entities, graph.edges);
    bindings = model.discoverWidgets();
}

function renderAll(): void {
    const grid = document.getElementById("widgets")!;
    grid.innerHTML = "";
    containers.clear();
    for (const binding of bindings) {
        const card = document.createElement("div");
        grid.append(card);
        containers.set(binding.name, card);
        renderWidget(card, model, api, binding);
    }
    const summary = document.getElementById("summary")!;
    summary.textContent =
        `${model.entities.size} entities · ${model.edges.length} edges · ` +
        `${bindings.length} widgets`;
}

function setConnection(state: string): void {
    const pill = document.getElementById("connection")!;
    pill.textContent = state;
    pill.className = state === "connected" ? "pill ok" : "pill bad";
}

async function boot(): Promise<void> {
    await loadModel();
    renderAll();
    streamEvents("", {
        onStatus: setConnection,
        onEvent: (event) => {
            const change = model.apply(event);
            if (change.kind === "property") {
                for (const binding of model.affectedWidgets(
                        bindings, change.entity, change.prop)) {
                    const card = containers.get(binding.name);
                    if (card) {
                        renderWidget(card, model, api, binding);
                    }
                }
            } else if (change.kind === "structural") {
                // structure moved under us: rebuild bindings from the model
                bindings = model.discoverWidgets();
                renderAll();
            }
        },
    });
}

window.addEventListener("DOMContentLoaded", () => {
    boot().catch((err) => {
        document.getElementById("errors")!.textContent =
            `failed to load the graph: ${err instanceof Error ? err.message : err}`;
    });
});
