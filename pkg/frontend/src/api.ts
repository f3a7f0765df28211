// Typed client over the engine's HTTP/JSON API. All state changes in the UI
// go through these calls; nothing touches the stores directly.

export interface EntityDoc {
  bn_id: string;
  kind: "Participant" | "Host" | "MessageFlow";
  name: string;
  attributes: Record<string, string>;
  labels?: string[];
  groups?: string[];
  source?: string;
  target?: string;
}

export interface ExportDoc {
  entities: EntityDoc[];
  flows: EntityDoc[];
  runs_on: { participant: string; host: string }[];
  mappings: { source: string; bn_id: string }[];
}

export interface SearchHit {
  bn_id: string;
  kind: string;
  name: string;
  score: number;
}

export interface LineageDoc {
  bn_id: string;
  transformation: "black-box" | "aggregator";
  sources: string[];
  field_contributions: Record<string, string>;
}

export interface EnhancementDoc {
  enhancement_id: string;
  op: string;
  target: string | null;
  field: string | null;
  value: string | null;
  status: "pending" | "deployed" | "failed";
  warning: string | null;
  plans: { origin: string }[];
}

export const USER_MARKER = "user-enhancement";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public candidates?: string[],
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class EngineClient {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (body as { error?: string }).error ?? `HTTP ${response.status}`,
        (body as { candidates?: string[] }).candidates,
      );
    }
    return body as T;
  }

  exportNetwork(): Promise<ExportDoc> {
    return this.request("/export");
  }

  search(params: {
    query?: string;
    type?: string;
    filters?: Record<string, string>;
  }): Promise<{ results: SearchHit[]; total: number }> {
    const qs = new URLSearchParams();
    if (params.query) qs.set("query", params.query);
    if (params.type) qs.set("type", params.type);
    for (const [field, value] of Object.entries(params.filters ?? {})) {
      qs.set(field, value);
    }
    return this.request(`/search?${qs.toString()}`);
  }

  project(name: string, paths: string[]): Promise<Record<string, unknown>> {
    const qs = paths.length ? `?show=${encodeURIComponent(paths.join(","))}` : "";
    return this.request(`/${encodeURIComponent(name)}/${qs}`);
  }

  neighbors(name: string, kind?: string): Promise<EntityDoc[]> {
    const suffix = kind ? `${encodeURIComponent(kind)}/` : "";
    return this.request(`/${encodeURIComponent(name)}/neighbors/${suffix}`);
  }

  lineage(name: string): Promise<LineageDoc> {
    return this.request(`/${encodeURIComponent(name)}/lineage`);
  }

  addLabel(target: string, text: string): Promise<unknown> {
    return this.request("/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, text }),
    });
  }

  addGroup(name: string, members: string[]): Promise<unknown> {
    return this.request("/groups", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name, members }),
    });
  }

  modifyField(target: string, field: string, value: string): Promise<EnhancementDoc> {
    return this.request(
      `/${encodeURIComponent(target)}/fields/${encodeURIComponent(field)}`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ value }),
      },
    );
  }

  deploy(enhancementId: string): Promise<EnhancementDoc> {
    return this.request(`/deploy/${encodeURIComponent(enhancementId)}`, {
      method: "POST",
    });
  }

  enhancements(): Promise<EnhancementDoc[]> {
    return this.request("/enhancements");
  }
}
