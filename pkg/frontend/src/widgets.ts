// DOM rendering, one card per widget binding. Rendering is a pure function
// of the model; gestures go through actions.ts and the next stream event
// brings the change back (no optimistic updates).

import { Api } from "./api.js";
import { clickButton, saveCode, submitInput, toggleGalleryItem } from "./actions.js";
import { GraphModel, galleryItems, logLines, plotSeries } from "./model.js";
import { CodeValue, WidgetBinding } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className?: string, text?: string): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) {
        node.className = className;
    }
    if (text !== undefined) {
        node.textContent = text;
    }
    return node;
}

function reportError(err: unknown): void {
    const bar = document.getElementById("errors");
    if (bar) {
        bar.textContent = err instanceof Error ? err.message : String(err);
        setTimeout(() => { bar.textContent = ""; }, 6000);
    }
}

export function renderWidget(container: HTMLElement, model: GraphModel,
                             api: Api, binding: WidgetBinding): void {
    container.innerHTML = "";
    container.dataset.widget = binding.name;
    container.className = `widget widget-${binding.role}`;
    if (binding.style.background) {
        container.style.background = binding.style.background;
    }
    if (binding.style.border) {
        container.style.borderColor = binding.style.border;
    }
    const header = el("div", "widget-header");
    header.append(el("span", "widget-name", binding.name),
                  el("span", "widget-kind", binding.kind));
    container.append(header);

    const body = el("div", "widget-body");
    container.append(body);
    switch (binding.role) {
        case "gallery": return renderGallery(body, model, api, binding);
        case "plot": return renderPlot(body, model, binding);
        case "status": return renderStatus(body, model, binding);
        case "log": return renderLog(body, model, binding);
        case "input": return renderInput(body, api, binding);
        case "button": return renderButton(body, api, binding);
        case "code-editor": return renderCodeEditor(body, model, api, binding);
        default: return renderInspector(body, model, binding);
    }
}

function renderGallery(body: HTMLElement, model: GraphModel, api: Api,
                       binding: WidgetBinding): void {
    const items = galleryItems(model.watchedValue(binding));
    if (items.length === 0) {
        body.append(el("div", "empty", "no data yet"));
        return;
    }
    const grid = el("div", "gallery-grid");
    items.forEach((item, index) => {
        const tile = el("div", item.positive ? "tile positive" : "tile negative");
        if (/^https?:/.test(item.src)) {
            const img = el("img");
            img.src = item.src;
            img.alt = item.label;
            tile.append(img);
        } else {
            tile.append(el("div", "tile-src", item.src));
        }
        tile.append(el("div", "tile-label", item.label));
        tile.title = "click to toggle the label";
        tile.addEventListener("click", () => {
            toggleGalleryItem(api, model, binding, index).catch(reportError);
        });
        grid.append(tile);
    });
    body.append(grid);
}

function renderPlot(body: HTMLElement, model: GraphModel,
                    binding: WidgetBinding): void {
    const series = plotSeries(model.watchedValue(binding));
    if (series.length === 0) {
        body.append(el("div", "empty", "no data yet"));
        return;
    }
    const width = 360;
    const height = 120;
    const min = Math.min(...series);
    const max = Math.max(...series);
    const span = max - min || 1;
    const points = series.map((y, i) => {
        const px = series.length === 1 ? 0 : (i / (series.length - 1)) * width;
        const py = height - ((y - min) / span) * (height - 8) - 4;
        return `${px.toFixed(1)},${py.toFixed(1)}`;
    }).join(" ");
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    svg.classList.add("plot");
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", points);
    svg.append(line);
    body.append(svg);
    body.append(el("div", "plot-range",
                   `${min.toPrecision(3)} … ${max.toPrecision(3)}`));
}

function renderStatus(body: HTMLElement, model: GraphModel,
                      binding: WidgetBinding): void {
    const value = model.watchedValue(binding);
    const text = value === null ? "—" :
        typeof value === "string" ? value : JSON.stringify(value);
    const badge = el("div", "status-badge", text);
    badge.classList.add(text === "running" ? "busy"
        : text.startsWith("error") ? "bad" : "ok");
    body.append(badge);
}

function renderLog(body: HTMLElement, model: GraphModel,
                   binding: WidgetBinding): void {
    const pre = el("pre", "log-lines", logLines(model.watchedValue(binding)).join("\n"));
    body.append(pre);
    pre.scrollTop = pre.scrollHeight;
}

function renderInput(body: HTMLElement, api: Api, binding: WidgetBinding): void {
    const field = el("input") as HTMLInputElement;
    field.type = "text";
    field.placeholder = binding.label;
    const send = el("button", "", "set");
    const submit = () => {
        submitInput(api, binding, field.value).catch(reportError);
        field.select();
    };
    send.addEventListener("click", submit);
    field.addEventListener("keydown", (ev) => {
        if (ev.key === "Enter") {
            submit();
        }
    });
    body.append(field, send);
}

function renderButton(body: HTMLElement, api: Api, binding: WidgetBinding): void {
    const button = el("button", "action", binding.label);
    if (binding.messageTarget === null) {
        button.disabled = true;
        button.title = "no messages edge";
    }
    button.addEventListener("click", () => {
        clickButton(api, binding).catch(reportError);
    });
    body.append(button);
}

function renderCodeEditor(body: HTMLElement, model: GraphModel, api: Api,
                          binding: WidgetBinding): void {
    const code = model.watchedValue(binding) as CodeValue | null;
    const area = el("textarea") as HTMLTextAreaElement;
    area.value = code?.text ?? "";
    area.spellcheck = false;
    const save = el("button", "", "save");
    save.addEventListener("click", () => {
        saveCode(api, model, binding, area.value).catch(reportError);
    });
    const meta = el("div", "code-meta",
                    code ? `${code.language} · ${binding.watched[0]?.entity ?? ""}` : "no code");
    body.append(area, save, meta);
}

function renderInspector(body: HTMLElement, model: GraphModel,
                         binding: WidgetBinding): void {
    const dump = model.entities.get(binding.name);
    if (!dump) {
        body.append(el("div", "empty", "gone"));
        return;
    }
    const table = el("table", "inspector");
    for (const [prop, spec] of Object.entries(dump.properties)) {
        const row = el("tr");
        row.append(el("td", "prop-name", prop),
                   el("td", "prop-type", spec.type),
                   el("td", "prop-value", JSON.stringify(spec.value)),
                   el("td", "prop-version", `v${spec.version}`));
        table.append(row);
    }
    body.append(table);
}
