import { ApiClient } from "./api";
import { App } from "./app";

// base URL: same origin when served from /ui, overridable via ?api=
const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "");
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new App(root, api).start();
