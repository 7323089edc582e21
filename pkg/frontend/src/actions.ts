// Every user gesture maps to exactly one API call; nothing mutates the
// model directly — updates come back through the event stream.

import { Api } from "./api.js";
import { GraphModel, toggledGallery } from "./model.js";
import { CodeValue, WaveSummary, WidgetBinding } from "./types.js";

export function submitInput(api: Api, binding: WidgetBinding,
                            text: string): Promise<WaveSummary> {
    return api.putProperty(binding.name, "value", text);
}

export function clickButton(api: Api, binding: WidgetBinding):
        Promise<{ status: string; detail: string }> {
    if (binding.messageTarget === null) {
        return Promise.reject(new Error(`${binding.name} has no messages edge`));
    }
    return api.message(binding.messageTarget, binding.verb);
}

export function toggleGalleryItem(api: Api, model: GraphModel, binding: WidgetBinding,
                                  index: number): Promise<WaveSummary> {
    const watched = binding.watched[0];
    if (!watched) {
        return Promise.reject(new Error(`${binding.name} watches nothing`));
    }
    const updated = toggledGallery(model.value(watched.entity, watched.prop), index);
    return api.putProperty(watched.entity, watched.prop, updated);
}

export function editedCode(model: GraphModel, binding: WidgetBinding,
                           newText: string): { target: string; code: CodeValue } {
    const watched = binding.watched[0];
    if (!watched) {
        throw new Error(`${binding.name} watches nothing`);
    }
    const current = model.value(watched.entity, watched.prop) as CodeValue | null;
    return {
        target: watched.entity,
        code: {
            language: current?.language ?? "python",
            entrypoint: current?.entrypoint ?? "main",
            text: newText,
        },
    };
}

export function saveCode(api: Api, model: GraphModel, binding: WidgetBinding,
                         newText: string): Promise<WaveSummary> {
    const watched = binding.watched[0];
    if (!watched) {
        return Promise.reject(new Error(`${binding.name} watches nothing`));
    }
    const { target, code } = editedCode(model, binding, newText);
    return api.putProperty(target, watched.prop, code);
}
