import { GameApi } from "./api";
import { App } from "./app";
import "./style.css";

function element(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

async function boot(): Promise<void> {
  const api = new GameApi("");
  const app = new App(api, {
    board: element("board"),
    status: element("status"),
    result: element("result"),
    moves: element("moves"),
    overlayToggle: element("overlay-toggle"),
  });

  const agentSelect = element("agent") as HTMLSelectElement;
  const colorSelect = element("color") as HTMLSelectElement;
  const promoSelect = element("promotion") as HTMLSelectElement;
  app.promotionChoice = () => promoSelect.value;

  try {
    const { agents } = await api.listAgents();
    agentSelect.innerHTML = agents
      .map((name) => `<option value="${name}">${name}</option>`)
      .join("");
  } catch {
    element("status").textContent = "server unreachable";
  }

  element("new-game").addEventListener("click", () => {
    element("result").classList.remove("visible");
    void app.newGame(agentSelect.value, colorSelect.value as "white" | "black");
  });
}

void boot();
